"""Discrete time/frequency lattice and the state and operator containers.

Amplitudes are stored as envelopes relative to the carrier ``omega0``: the
physical field sample is ``amp[j] * exp(-1j * omega0 * t[j])``. Inner
products, expectation values and the frequency transform are written so that
the carrier cancels out wherever it should; the only place it shows up
explicitly is the phase of the time eigenstates and of delayed pulses.

Quadrature convention: every sum over time carries a factor ``dt`` and every
sum over frequency a factor ``domega = 2*pi/(n*dt)``. A time eigenstate is a
discrete delta of height ``1/dt``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._validation import (
    check_hermitian,
    check_same_grid,
    check_square,
    check_vector,
    frozen,
)

_SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time axis ``t_j = t_start + j*dt`` with a centred frequency band.

    Frequency samples are ``omega0 + m*domega`` with ``m = k - n_points//2``.
    The whole band has to stay at positive frequencies, i.e.
    ``2*pi/dt < 2*omega0``.
    """

    n_points: int
    dt: float
    t_start: float
    omega0: float

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError(f"n_points must be an integer >= 2, got {self.n_points}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be > 0, got {self.omega0}")
        if not np.isfinite(self.t_start):
            raise ValueError("t_start must be finite")
        if not 2.0 * np.pi / self.dt < 2.0 * self.omega0:
            raise ValueError(
                "frequency band 2*pi/dt must be narrower than 2*omega0 "
                f"(2*pi/dt={2 * np.pi / self.dt:.6g}, omega0={self.omega0:.6g})"
            )
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "omega0", float(self.omega0))

    @classmethod
    def centered(cls, n_points, dt, omega0):
        """Grid whose sample ``n_points//2`` sits exactly at ``t = 0``."""
        return cls(n_points, dt, -(n_points // 2) * dt, omega0)

    @cached_property
    def times(self):
        return frozen(self.t_start + self.dt * np.arange(self.n_points))

    @property
    def t_end(self):
        return self.t_start + (self.n_points - 1) * self.dt

    @property
    def domega(self):
        return 2.0 * np.pi / (self.n_points * self.dt)

    @cached_property
    def bin_index(self):
        """Signed bin number ``m`` of every frequency sample."""
        return frozen(np.arange(self.n_points) - self.n_points // 2)

    @cached_property
    def detunings(self):
        """``omega_k - omega0`` for every frequency sample."""
        return frozen(self.bin_index * self.domega)

    @cached_property
    def omegas(self):
        return frozen(self.omega0 + self.detunings)

    def index_of(self, t, atol=1e-9):
        """Index of the sample at time ``t``; ``t`` has to lie on the grid."""
        x = (t - self.t_start) / self.dt
        j = int(round(x))
        if abs(x - j) > atol or not 0 <= j < self.n_points:
            raise ValueError(f"time {t!r} is not a grid sample")
        return j

    def contains(self, t):
        return self.t_start - 0.5 * self.dt <= t <= self.t_end + 0.5 * self.dt


@dataclass(frozen=True, eq=False)
class TemporalState:
    """Envelope samples ``amp[j]`` of a single-photon wavefunction."""

    grid: TimeGrid
    amp: np.ndarray
    unnormalized: bool = False

    def __post_init__(self):
        amp = check_vector(self.amp, self.grid.n_points)
        object.__setattr__(self, "amp", frozen(amp))
        if not self.unnormalized:
            norm = self.norm_squared
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(
                    f"state norm is {norm:.12g}; pass unnormalized=True for intermediate values"
                )

    @property
    def norm_squared(self):
        return float(np.sum(np.abs(self.amp) ** 2) * self.grid.dt)

    def normalize(self):
        norm = self.norm_squared
        if norm == 0.0:
            raise ValueError("cannot normalize the zero state")
        return TemporalState(self.grid, self.amp / np.sqrt(norm))

    def field(self):
        """Physical field samples, envelope times ``exp(-i omega0 t)``."""
        return self.amp * np.exp(-1j * self.grid.omega0 * self.grid.times)

    def __add__(self, other):
        check_same_grid(self, other)
        return TemporalState(self.grid, self.amp + other.amp, unnormalized=True)

    def __mul__(self, scalar):
        return TemporalState(self.grid, self.amp * complex(scalar), unnormalized=True)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Frequency amplitudes ``<omega_k|psi>`` on the grid's centred band."""

    grid: TimeGrid
    amp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amp", frozen(check_vector(self.amp, self.grid.n_points)))

    @property
    def norm_squared(self):
        return float(np.sum(np.abs(self.amp) ** 2) * self.grid.domega)


def to_frequency(state):
    """Unitary transform ``<omega_k|psi> = (1/sqrt(2 pi)) sum_j e^{i omega_k t_j} psi(t_j) dt``.

    The carrier cancels against the envelope convention, leaving the detuning
    ``omega_k - omega0`` in the exponent. Works for any grid size.
    """
    g = state.grid
    n = g.n_points
    m = g.bin_index
    # sum_j exp(2 pi i m j / n) a_j == n * ifft(a)[m mod n]
    core = n * np.fft.ifft(state.amp)[m % n]
    amp = (g.dt / _SQRT_2PI) * np.exp(1j * g.detunings * g.t_start) * core
    return SpectralState(g, amp)


def to_time(spec, unnormalized=False):
    """Exact inverse of :func:`to_frequency`."""
    g = spec.grid
    n = g.n_points
    u = np.zeros(n, dtype=complex)
    u[g.bin_index % n] = np.exp(-1j * g.detunings * g.t_start) * spec.amp
    amp = (g.domega / _SQRT_2PI) * np.fft.fft(u)
    if not unnormalized and abs(np.sum(np.abs(amp) ** 2) * g.dt - 1.0) > 1e-9:
        unnormalized = True
    return TemporalState(g, amp, unnormalized=unnormalized)


def inner(a, b):
    """``<a|b> = sum_j conj(a_j) b_j dt``."""
    g = check_same_grid(a, b)
    return complex(np.vdot(a.amp, b.amp) * g.dt)


def time_eigenstate(grid, j):
    """Discrete delta at sample ``j``: height ``1/dt`` with the carrier phase of ``t_j``.

    With this phase, ``inner(time_eigenstate(grid, j), psi)`` is the physical
    field value ``psi.field()[j]`` and its spectrum is exactly
    ``exp(i omega_k t_j)/sqrt(2 pi)``.
    """
    if not 0 <= j < grid.n_points:
        raise IndexError(f"sample index {j} out of range for n_points={grid.n_points}")
    amp = np.zeros(grid.n_points, dtype=complex)
    amp[j] = np.exp(1j * grid.omega0 * grid.times[j]) / grid.dt
    return TemporalState(grid, amp, unnormalized=True)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Kernel ``rho(t_j, t_k)`` of a single-photon mixed state (envelope frame)."""

    grid: TimeGrid
    kernel: np.ndarray

    def __post_init__(self):
        n = self.grid.n_points
        ker = check_square(self.kernel, n)
        check_hermitian(ker)
        trace = float(np.real(np.trace(ker))) * self.grid.dt
        if abs(trace - 1.0) > 1e-9:
            raise ValueError(f"density matrix trace is {trace:.12g}, expected 1")
        evals = np.linalg.eigvalsh(0.5 * (ker + ker.conj().T))
        if evals[0] < -1e-9 * max(evals[-1], 0.0):
            raise ValueError(f"density matrix is not positive semidefinite (min eigenvalue {evals[0]:.3e})")
        object.__setattr__(self, "kernel", frozen(ker))

    @classmethod
    def from_pure(cls, state):
        if state.unnormalized:
            state = state.normalize()
        return cls(state.grid, np.outer(state.amp, state.amp.conj()))

    @classmethod
    def mixture(cls, weights, states):
        weights = np.asarray(weights, dtype=float)
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        grid = check_same_grid(*states)
        ker = sum(w * np.outer(s.amp, s.amp.conj()) for w, s in zip(weights, states))
        return cls(grid, ker)

    @property
    def operator(self):
        """Matrix of the operator on the sample basis (``kernel * dt``, unit trace)."""
        return self.kernel * self.grid.dt

    def sandwich(self, a, b=None):
        """``<a|rho|b>`` for two temporal states."""
        b = a if b is None else b
        check_same_grid(self, a, b)
        dt = self.grid.dt
        return complex(a.amp.conj() @ self.kernel @ b.amp * dt * dt)


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    """Observable ``const_offset * 1 + sum_r weights[r] |v_r><v_r|``.

    The identity part is kept as a scalar so the continuum background needs no
    delta kernel. The rank-one factors are the canonical storage; ``kernel``
    (with ``<t_j|K|t_k>`` semantics, i.e. ``sum_r w_r v_r v_r^*``) is derived
    on demand.
    """

    grid: TimeGrid
    const_offset: float
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    vectors: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=complex))

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        v = np.asarray(self.vectors, dtype=complex).reshape(len(w), self.grid.n_points)
        object.__setattr__(self, "const_offset", float(self.const_offset))
        object.__setattr__(self, "weights", frozen(w))
        object.__setattr__(self, "vectors", frozen(v))

    @classmethod
    def from_kernel(cls, grid, kernel, const_offset):
        ker = check_square(kernel, grid.n_points)
        check_hermitian(ker, rtol=1e-10)
        evals, evecs = np.linalg.eigh(0.5 * (ker + ker.conj().T))
        keep = np.abs(evals) > 1e-14 * max(np.max(np.abs(evals)), np.finfo(float).tiny)
        return cls(grid, const_offset, evals[keep], evecs[:, keep].T)

    @cached_property
    def kernel(self):
        return frozen(np.einsum("r,rj,rk->jk", self.weights, self.vectors, self.vectors.conj()))

    @property
    def rank(self):
        return len(self.weights)


def expectation(op, rho):
    """``Tr(rho M) = const_offset + sum_jk K_kj rho_jk dt^2`` as a real number."""
    check_same_grid(op, rho)
    dt = op.grid.dt
    value = complex(op.const_offset)
    for w, v in zip(op.weights, op.vectors):
        value += w * (v.conj() @ rho.kernel @ v) * dt * dt
    scale = max(1.0, abs(value))
    if abs(value.imag) > 1e-10 * scale:
        raise ValueError(f"expectation has imaginary residue {value.imag:.3e}; operator not Hermitian")
    return float(value.real)
