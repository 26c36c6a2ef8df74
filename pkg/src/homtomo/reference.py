"""Reference pulses, delays, the bandwidth filter and two-time superpositions."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import erf, sici

from ._validation import LeakageError, check_vector, frozen
from .grid import SpectralState, TemporalState, to_frequency, to_time

_SQRT_2PI = np.sqrt(2.0 * np.pi)

MAX_LEAK = 1e-3


@dataclass(frozen=True)
class ReferenceSpec:
    """Shape of a reference pulse.

    ``shape`` is ``"gaussian"`` (intensity rms width ``tau``) or
    ``"rect_spectrum"`` (flat spectrum of full width ``delta_omega``).
    """

    shape: str
    tau: float | None = None
    delta_omega: float | None = None
    peak_time: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.shape == "gaussian":
            if self.tau is None or not self.tau > 0:
                raise ValueError("gaussian reference needs tau > 0")
        elif self.shape == "rect_spectrum":
            if self.delta_omega is None or not self.delta_omega > 0:
                raise ValueError("rect_spectrum reference needs delta_omega > 0")
        else:
            raise ValueError(f"unknown reference shape {self.shape!r}")

    @classmethod
    def gaussian(cls, tau, peak_time=0.0, phase=0.0):
        return cls("gaussian", tau=tau, peak_time=peak_time, phase=phase)

    @classmethod
    def gaussian_bandwidth(cls, delta_omega, peak_time=0.0, phase=0.0):
        """Gaussian whose equivalent rectangular bandwidth is ``delta_omega``.

        The equivalent rectangular bandwidth of ``|f|^2`` is
        ``(int |f|^2)^2 / int |f|^4``, which for this pulse is ``sqrt(pi)/tau``.
        """
        return cls.gaussian(np.sqrt(np.pi) / delta_omega, peak_time, phase)

    @classmethod
    def rect_spectrum(cls, delta_omega, peak_time=0.0, phase=0.0):
        return cls("rect_spectrum", delta_omega=delta_omega, peak_time=peak_time, phase=phase)


def _gaussian_fraction(a, b, center, tau):
    s = np.sqrt(2.0) * tau
    return 0.5 * (erf((b - center) / s) - erf((a - center) / s))


def _sinc2_cumulative(x):
    # antiderivative of sin(x)^2/x^2, zero at the origin
    x = np.asarray(x, dtype=float)
    si, _ = sici(2.0 * x)
    safe = np.where(x == 0.0, 1.0, x)
    return np.where(x == 0.0, 0.0, si - np.sin(x) ** 2 / safe)


def _rect_fraction(a, b, center, width):
    xa, xb = 0.5 * width * (a - center), 0.5 * width * (b - center)
    return float((_sinc2_cumulative(xb) - _sinc2_cumulative(xa)) / np.pi)


def rect_band_mask(grid, delta_omega):
    """Frequency bins whose centre lies inside ``[-delta_omega/2, delta_omega/2]`` of the carrier."""
    return np.abs(grid.detunings) <= 0.5 * delta_omega


def make_pulse(grid, spec):
    """Normalized reference pulse for ``spec`` on ``grid``.

    The carrier phase ``exp(i omega0 t_peak)`` is included, so a pulse with
    ``peak_time=t`` is exactly the delayed version of the one at ``t=0``.
    Raises :class:`LeakageError` when more than 0.1% of the continuum pulse
    norm falls outside the time window or the frequency band.
    """
    lo = grid.t_start - 0.5 * grid.dt
    hi = grid.t_end + 0.5 * grid.dt
    carrier = np.exp(1j * (grid.omega0 * spec.peak_time + spec.phase))
    if spec.shape == "gaussian":
        inside = _gaussian_fraction(lo, hi, spec.peak_time, spec.tau)
        # spectral intensity rms is 1/(2 tau)
        band = _gaussian_fraction(-np.pi / grid.dt, np.pi / grid.dt, 0.0, 0.5 / spec.tau)
        leak = max(1.0 - inside, 1.0 - band)
        if leak > MAX_LEAK:
            raise LeakageError(f"gaussian pulse leaks {leak:.3e} of its norm outside the grid")
        env = np.exp(-((grid.times - spec.peak_time) ** 2) / (4.0 * spec.tau**2))
        state = TemporalState(grid, carrier * env, unnormalized=True)
        return state.normalize()

    mask = rect_band_mask(grid, spec.delta_omega)
    count = int(mask.sum())
    if count == 0:
        raise ValueError("rect_spectrum bandwidth is narrower than one frequency bin")
    if count == grid.n_points and spec.delta_omega > 2.0 * np.pi / grid.dt:
        raise LeakageError("rect_spectrum bandwidth exceeds the grid band")
    width = count * grid.domega
    leak = 1.0 - _rect_fraction(lo, hi, spec.peak_time, width)
    if leak > MAX_LEAK:
        raise LeakageError(f"rect_spectrum pulse leaks {leak:.3e} of its norm outside the grid")
    amp = np.where(mask, 1.0 / np.sqrt(width), 0.0) * np.exp(1j * grid.detunings * spec.peak_time)
    state = to_time(SpectralState(grid, carrier * amp), unnormalized=True)
    return state.normalize()


def _leaked_fraction(state, delay):
    g = state.grid
    dest = g.times + delay
    outside = (dest < g.t_start - 0.5 * g.dt) | (dest > g.t_end + 0.5 * g.dt)
    weights = np.abs(state.amp) ** 2
    total = weights.sum()
    return float(weights[outside].sum() / total) if total > 0 else 0.0


def time_shift(state, delay, max_leak=MAX_LEAK):
    """Delay a state by ``delay`` seconds via ``exp(i omega_k delay)`` in frequency.

    Exact for any real delay on the periodic grid; the carrier factor
    ``exp(i omega0 delay)`` is kept. Raises :class:`LeakageError` if more than
    ``max_leak`` of the norm would be moved past either end of the window.
    """
    if delay == 0.0:
        return state
    leak = _leaked_fraction(state, delay)
    if leak > max_leak:
        raise LeakageError(f"shift by {delay:g} pushes {leak:.3e} of the norm out of the window")
    spec = to_frequency(state)
    shifted = SpectralState(state.grid, spec.amp * np.exp(1j * state.grid.omegas * delay))
    out = to_time(shifted, unnormalized=True)
    return TemporalState(state.grid, out.amp, unnormalized=state.unnormalized)


@dataclass(frozen=True, eq=False)
class FilterOperator:
    """Frequency-diagonal operator turning a time eigenstate into the reference pulse.

    ``eigenvalues[k] = sqrt(2 pi) <omega_k|Phi(0)>``.
    """

    grid: object
    eigenvalues: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "eigenvalues", frozen(check_vector(self.eigenvalues, self.grid.n_points, "eigenvalues"))
        )

    def apply(self, state):
        spec = to_frequency(state)
        return to_time(SpectralState(self.grid, self.eigenvalues * spec.amp), unnormalized=True)

    def adjoint(self):
        return FilterOperator(self.grid, self.eigenvalues.conj())

    @property
    def transmission(self):
        """``|f(omega_k)|^2``, the eigenvalues of ``F^dagger F``."""
        return np.abs(self.eigenvalues) ** 2

    def is_transform_limited(self, rtol=1e-12):
        f = self.eigenvalues
        scale = float(np.max(np.abs(f)))
        return bool(np.max(np.abs(f.imag)) <= rtol * scale and np.min(f.real) >= -rtol * scale)

    @property
    def bandwidth(self):
        """Equivalent rectangular bandwidth ``(sum |f|^2 dw)^2 / sum |f|^4 dw``."""
        t = self.transmission
        return float(t.sum() ** 2 / (t**2).sum() * self.grid.domega)

    def band_mask(self, clip_threshold=1e-3):
        t = self.transmission
        return t > clip_threshold * t.max()

    @cached_property
    def pulse(self):
        """The reference pulse ``Phi(0) = F|0>``."""
        spec = SpectralState(self.grid, self.eigenvalues / _SQRT_2PI)
        return to_time(spec)

    def pulse_at(self, t, max_leak=MAX_LEAK):
        """``F|t> = Phi(t)`` for any real ``t``."""
        return time_shift(self.pulse, t, max_leak=max_leak)


def filter_from_pulse(pulse_at_zero):
    """Filter operator of a normalized reference pulse peaked at ``t = 0``."""
    if pulse_at_zero.unnormalized:
        raise ValueError("reference pulse must be normalized")
    if not pulse_at_zero.grid.contains(0.0):
        raise ValueError("t = 0 must lie inside the grid window")
    spec = to_frequency(pulse_at_zero)
    return FilterOperator(pulse_at_zero.grid, _SQRT_2PI * spec.amp)


def superposition_reference(grid, t1, t2, phi, F, mode="subperiod_shift"):
    """Normalized two-time reference ``F(|t1> + e^{i phi}|t2>)``.

    ``mode="exact_phase"`` multiplies the second branch by ``exp(i phi)``;
    ``mode="subperiod_shift"`` instead delays it by ``phi/omega0``, the way the
    phase is set in the lab. Both agree to the accuracy measured by
    :func:`sigma_overlap`.
    """
    if t1 == t2:
        raise ValueError("superposition reference needs two distinct times")
    if F.grid != grid:
        raise ValueError("filter and grid differ")
    first = F.pulse_at(t1)
    if mode == "exact_phase":
        second = np.exp(1j * phi) * F.pulse_at(t2)
    elif mode == "subperiod_shift":
        second = F.pulse_at(t2 + phi / grid.omega0)
    else:
        raise ValueError(f"unknown superposition mode {mode!r}")
    return (first + second).normalize()


def sigma_overlap(F, t=0.0, phi=0.0):
    """Normalized overlap between ``F|t>`` and ``F|t + phi/omega0>``.

    ``F^dagger F`` is diagonal in frequency, so the value does not depend on
    ``t``; it is a ratio of weighted sums over ``|f(omega)|^2``.
    """
    w = F.transmission
    tau = phi / F.grid.omega0
    arg = F.grid.detunings * tau
    re = float(np.sum(w * np.cos(arg)))
    im = float(np.sum(w * np.sin(arg)))
    total = float(np.sum(w))
    return (re * re + im * im) / (total * total)
