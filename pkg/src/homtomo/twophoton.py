"""Photon pairs: four-fold coincidences, two-photon coherence and the separability witness.

Two-photon states are kept as ensembles of pure amplitudes ``psi[a, b]`` over
(arm A time, arm B time); no n^2 x n^2 matrix is ever formed. Single-arm
observables act on the amplitude matrix from the left (arm A) and the right
(arm B).
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_same_grid, check_square, frozen
from .measurement import CoherenceSetting, coherence_operator, delayed_operator

SEPARABLE_BOUND = 0.25
MAXIMAL_COHERENCE = 0.5
TIMESCALE_LEVEL = 0.375


@dataclass(frozen=True, eq=False)
class BipartiteState:
    """Weighted ensemble of normalized pair amplitudes on a shared grid."""

    grid: object
    ensemble: tuple

    def __post_init__(self):
        if not self.ensemble:
            raise ValueError("ensemble must not be empty")
        dt = self.grid.dt
        items = []
        total = 0.0
        for weight, amp in self.ensemble:
            weight = float(weight)
            if not weight > 0:
                raise ValueError("ensemble weights must be > 0")
            amp = check_square(amp, self.grid.n_points, "amp")
            norm = float(np.sum(np.abs(amp) ** 2)) * dt * dt
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"pair amplitude has norm {norm:.12g}, expected 1")
            items.append((weight, frozen(amp)))
            total += weight
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"ensemble weights sum to {total:.12g}, expected 1")
        object.__setattr__(self, "ensemble", tuple(items))

    @classmethod
    def pure(cls, grid, amp):
        amp = np.asarray(amp, dtype=complex)
        amp = amp / np.sqrt(np.sum(np.abs(amp) ** 2) * grid.dt**2)
        return cls(grid, ((1.0, amp),))

    @classmethod
    def product(cls, a, b):
        grid = check_same_grid(a, b)
        return cls.pure(grid, np.outer(a.amp, b.amp))

    @classmethod
    def mixture(cls, weights, states):
        grid = states[0].grid
        items = []
        for w, s in zip(weights, states):
            if s.grid != grid:
                raise ValueError("all mixture components must share the grid")
            items.extend((w * wi, amp) for wi, amp in s.ensemble)
        return cls(grid, tuple(items))


@dataclass(frozen=True)
class PairSetting:
    A: CoherenceSetting
    B: CoherenceSetting


def _arm_terms(op, psi, dt, side):
    """Contract each rank-one factor of ``op`` with one index of ``psi``.

    Returns an array ``(r, n)`` of partial overlaps ``<v_r|psi>`` on arm A
    (``side=0``) or arm B (``side=1``).
    """
    if side == 0:
        return op.vectors.conj() @ psi * dt
    return (psi @ op.vectors.conj().T).T * dt


def pair_expectation(state, op_A=None, op_B=None):
    """``Tr(rho (M_A x M_B))``; ``None`` stands for the identity on that arm."""
    grid = state.grid
    dt = grid.dt
    for op in (op_A, op_B):
        if op is not None and op.grid != grid:
            raise ValueError("operator grid differs from the state grid")
    cA = 1.0 if op_A is None else op_A.const_offset
    cB = 1.0 if op_B is None else op_B.const_offset
    total = 0.0
    for weight, psi in state.ensemble:
        value = cA * cB
        if op_A is not None:
            uA = _arm_terms(op_A, psi, dt, 0)
            value += cB * float(np.sum(op_A.weights * np.sum(np.abs(uA) ** 2, axis=1))) * dt
        if op_B is not None:
            uB = _arm_terms(op_B, psi, dt, 1)
            value += cA * float(np.sum(op_B.weights * np.sum(np.abs(uB) ** 2, axis=1))) * dt
        if op_A is not None and op_B is not None:
            # <vA_r vB_s|psi> for every pair of factors
            joint = op_A.vectors.conj() @ psi @ op_B.vectors.conj().T * dt * dt
            value += float(np.sum(np.outer(op_A.weights, op_B.weights) * np.abs(joint) ** 2))
        total += weight * value
    return total


def fourfold_probability(state, F_A, F_B, setting):
    """Four-fold coincidence probability with two-time references in both arms."""
    return pair_expectation(state, coherence_operator(F_A, setting.A), coherence_operator(F_B, setting.B))


def projector_matrix(phi_A, phi_B):
    """Projector on the product reference in the basis ``|t1A t1B>, |t1A t2B>, |t2A t1B>, |t2A t2B>``."""
    eA, eB = np.exp(1j * phi_A), np.exp(1j * phi_B)
    v = np.array([1.0, eB, eA, eA * eB])
    return 0.25 * np.outer(v, v.conj())


def two_photon_coherence(state, F_A, F_B, times, phase_grid_size=4, offsets=(0.0, 0.0), normalized=False):
    """Coherence ``<Phi(t1A) Phi(t1B)|rho|Phi(t2A) Phi(t2B)>`` from a phase scan.

    Four-fold probabilities are taken on a ``K x K`` grid of phases
    ``phi_A = offsets[0] + 2 pi a / K`` (likewise for B); the term varying as
    ``exp(i (phi_A + phi_B))`` carries ``1/16`` of the coherence. With
    ``normalized=True`` the result is divided by the total population of the
    four time pairs, which makes it the coherence of the effective two-by-two
    state and keeps the 1/4 separable bound valid for overlapping pulses.
    """
    K = int(phase_grid_size)
    if K < 3:
        raise ValueError("phase grid needs K >= 3 to isolate the (1, 1) Fourier component")
    t1A, t2A, t1B, t2B = times
    phases = 2.0 * np.pi * np.arange(K) / K
    acc = 0.0j
    for a in phases:
        pA = offsets[0] + a
        for b in phases:
            pB = offsets[1] + b
            setting = PairSetting(CoherenceSetting(t1A, t2A, pA), CoherenceSetting(t1B, t2B, pB))
            prob = fourfold_probability(state, F_A, F_B, setting)
            acc += prob * np.exp(-1j * (pA + pB))
    coherence = 16.0 * acc / (K * K)
    if normalized:
        coherence /= pair_populations(state, F_A, F_B, times).sum()
    return complex(coherence)


def pair_populations(state, F_A, F_B, times):
    """``p[i, j] = <Phi(t_iA) Phi(t_jB)|rho|Phi(t_iA) Phi(t_jB)>`` from single-pulse four-folds.

    Uses ``<M_A x M_B> = 1/4 - d_A/4 - d_B/4 + p/4`` with the single-arm
    populations ``d = 1 - 2 <M x 1>``.
    """
    t1A, t2A, t1B, t2B = times
    out = np.empty((2, 2))
    for i, tA in enumerate((t1A, t2A)):
        MA = delayed_operator(F_A, tA)
        dA = 1.0 - 2.0 * pair_expectation(state, MA, None)
        for j, tB in enumerate((t1B, t2B)):
            MB = delayed_operator(F_B, tB)
            dB = 1.0 - 2.0 * pair_expectation(state, None, MB)
            out[i, j] = 4.0 * pair_expectation(state, MA, MB) - 1.0 + dA + dB
    return out


def entanglement_witness(coherence, tol=1e-9):
    """``(|C| > 1/4 + tol, |C| - 1/4)``: separable pairs never exceed 1/4.

    ``tol`` keeps round-off at the bound itself from firing the witness.
    """
    margin = abs(coherence) - SEPARABLE_BOUND
    return bool(margin > tol), float(margin)


@dataclass(frozen=True, eq=False)
class TimescaleScan:
    """Coherence versus time separation and the 3/8 crossing, if any.

    ``coherence`` holds the normalized two-photon coherence per ``delta_t``.
    A ``delta_t`` of 0 has no two-time reference; that row is the degenerate
    limit where all four time pairs coincide and is recorded as exactly 1/4.
    """

    delta_t: np.ndarray
    coherence: np.ndarray
    crossing: float | None
    direction: str | None
    degenerate: np.ndarray

    @property
    def magnitude(self):
        return np.abs(self.coherence)

    @property
    def extrema(self):
        m = self.magnitude
        return float(m.min()), float(m.max())


def _first_crossing(x, y, level):
    for i in range(len(x) - 1):
        a, b = y[i] - level, y[i + 1] - level
        if a == 0.0:
            return float(x[i]), ("rising" if b > 0 else "falling")
        if a * b < 0:
            frac = a / (a - b)
            return float(x[i] + frac * (x[i + 1] - x[i])), ("rising" if b > a else "falling")
    if len(y) and y[-1] == level:
        return float(x[-1]), None
    return None, None


def entanglement_timescale(state, F, t_base, dt_scan, F_B=None, phase_grid_size=4, level=TIMESCALE_LEVEL):
    """Scan ``C(dt) = <Phi(t) Phi(t)|rho|Phi(t + dt) Phi(t + dt)>`` and locate ``|C| = 3/8``.

    The coherence is normalized to the four-pair population (see
    :func:`two_photon_coherence`). The crossing is linearly interpolated
    between the first bracketing pair of scan points; ``crossing`` is
    ``None`` when the scan never crosses.
    """
    F_B = F if F_B is None else F_B
    dts = np.asarray(dt_scan, dtype=float)
    if dts.ndim != 1 or len(dts) < 2:
        raise ValueError("dt_scan needs at least two points")
    if np.any(np.diff(dts) <= 0):
        raise ValueError("dt_scan must be strictly increasing")
    values = np.empty(len(dts), dtype=complex)
    degenerate = dts == 0.0
    for i, d in enumerate(dts):
        if degenerate[i]:
            values[i] = SEPARABLE_BOUND
            continue
        times = (t_base, t_base + d, t_base, t_base + d)
        values[i] = two_photon_coherence(state, F, F_B, times, phase_grid_size, normalized=True)
    crossing, direction = _first_crossing(dts, np.abs(values), level)
    return TimescaleScan(dts, values, crossing, direction, degenerate)


def pdc_model(grid, pump_duration, correlation_time):
    """Gaussian pair amplitude ``exp(-(tA+tB)^2/(8 Tp^2) - (tA-tB)^2/(8 Tc^2))``, normalized."""
    if not pump_duration >= correlation_time > 0:
        raise ValueError("need pump_duration >= correlation_time > 0")
    if correlation_time < grid.dt:
        raise ValueError("correlation time is not resolved by the grid")
    t = grid.times
    s = t[:, None] + t[None, :]
    d = t[:, None] - t[None, :]
    amp = np.exp(-(s**2) / (8.0 * pump_duration**2) - d**2 / (8.0 * correlation_time**2))
    return BipartiteState.pure(grid, amp.astype(complex))
