"""Reconstruction of the temporal density matrix from bunching rates.

The data only ever see the filtered state: a single-pulse record at delay
``t`` gives ``<Phi(t)|rho|Phi(t)>`` and a four-phase coherence scan gives
``<Phi(t1)|rho|Phi(t2)>``. Collected over a set of support times these form
the filtered matrix ``R``. Deconvolution turns ``R`` back into a kernel on
the full grid by band-limited interpolation followed by division by the
filter eigenvalues.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .counts import RateRecord, exact_record, sample_rate
from .grid import DensityMatrix, TemporalState, expectation
from .measurement import (
    CoherenceSetting,
    delayed_operator,
    reference_overlap,
    superposition_norm,
    superposition_operator,
)

DEFAULT_PHASES = (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi)


class InconsistentRecordError(ValueError):
    """Rate data contradict the measurement model beyond their error bars."""


@dataclass(frozen=True)
class TomographySchedule:
    """Support times, coherence phases and the reference filter of a tomography run."""

    times: tuple
    F: object
    phases: tuple = DEFAULT_PHASES

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        phases = tuple(float(p) for p in self.phases)
        if not times:
            raise ValueError("schedule needs at least one support time")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("support times must be strictly increasing")
        if len(times) > 1 and len(phases) < 3:
            raise ValueError("at least 3 phases are needed to separate offset, Re and Im")
        wrapped = np.mod(phases, 2.0 * np.pi)
        diffs = np.abs(wrapped[:, None] - wrapped[None, :])
        diffs = np.minimum(diffs, 2.0 * np.pi - diffs)
        if np.any(diffs[np.triu_indices(len(phases), 1)] < 1e-12):
            raise ValueError("phases must be distinct modulo 2 pi")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "phases", phases)

    def settings(self):
        """All settings in a fixed order: delays first, then pairs by phase."""
        out = list(self.times)
        for t1, t2 in combinations(self.times, 2):
            out.extend(CoherenceSetting(t1, t2, phi) for phi in self.phases)
        return out


def forward_probability(rho, F, setting):
    """Coincidence probability for a delay or a normalized two-time reference."""
    if isinstance(setting, CoherenceSetting):
        return expectation(superposition_operator(F, setting), rho)
    return expectation(delayed_operator(F, setting), rho)


def simulate_records(rho, schedule, plan=None):
    """Exact (``plan=None``) or binomially sampled records for every scheduled setting."""
    records = []
    for index, setting in enumerate(schedule.settings()):
        p = forward_probability(rho, schedule.F, setting)
        if plan is None:
            records.append(exact_record(p, setting))
        else:
            records.append(sample_rate(p, plan, index, setting))
    return records


def reconstruct_diagonal(records, F=None):
    """Filtered populations ``<Phi(t)|rho|Phi(t)> = 2 (1/2 - rate)`` per single-pulse record."""
    out = np.empty(len(records))
    for i, rec in enumerate(records):
        if not rec.is_delay:
            raise ValueError("reconstruct_diagonal expects single-pulse (delay) records")
        if rec.rate > 0.5 + 3.0 * rec.stderr + 1e-9:
            raise InconsistentRecordError(
                f"rate {rec.rate:.6g} at delay {rec.setting!r} exceeds 1/2 by more than 3 stderr"
            )
        out[i] = 2.0 * (0.5 - rec.rate)
    return out


@dataclass(frozen=True)
class PhaseScanFit:
    """Fitted filtered coherence of one time pair.

    ``offset`` is the fitted population sum ``d1 + d2``; ``redundancy`` is
    ``y(0) + y(pi) - y(pi/2) - y(3pi/2)`` for the quarter phases (zero for
    consistent data), else the fit residual norm.
    """

    coherence: complex
    offset: float
    offset_stderr: float
    redundancy: float


def fit_phase_scan(records, overlap=0.0):
    """Least-squares fit of one phase scan with normalized two-time references.

    With ``v = Phi(t1) + e^{i phi} Phi(t2)`` and ``N(phi) = |v|^2`` the rate is
    ``p = 1/2 - <v|rho|v> / (2 N)``, so ``y = 2 N (1/2 - p)`` obeys
    ``y(phi) = d1 + d2 + 2 Re(e^{i phi} c)`` with ``c = <Phi(t1)|rho|Phi(t2)>``.
    ``overlap`` is ``<Phi(t1)|Phi(t2)>``. For orthogonal pulses and the
    phases ``0, pi/2, pi, 3pi/2`` this reduces to ``Re c = p(pi) - p(0)`` and
    ``Im c = p(pi/2) - p(3pi/2)``.
    """
    if not records:
        raise ValueError("no coherence records")
    pairs = {(r.setting.t1, r.setting.t2) for r in records}
    if len(pairs) != 1:
        raise ValueError("records must all belong to the same (t1, t2) pair")
    phi = np.array([r.setting.phi for r in records])
    p = np.array([r.rate for r in records])
    if len(np.unique(np.round(np.mod(phi, 2 * np.pi), 12))) < 3:
        raise ValueError("a coherence scan needs at least 3 distinct phases")
    norm = 2.0 + 2.0 * np.real(np.exp(1j * phi) * overlap)
    y = 2.0 * norm * (0.5 - p)
    design = np.column_stack([np.ones_like(phi), 2.0 * np.cos(phi), -2.0 * np.sin(phi)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    err = 2.0 * norm * np.array([r.stderr for r in records])
    cov = np.linalg.pinv(design.T @ design) @ design.T
    offset_stderr = float(np.sqrt(np.sum((cov[0] * err) ** 2)))
    by_phase = {round(float(np.mod(a, 2 * np.pi)), 9): b for a, b in zip(phi, y)}
    quarter = [round(float(x), 9) for x in DEFAULT_PHASES]
    if all(q in by_phase for q in quarter):
        q0, q1, q2, q3 = (by_phase[q] for q in quarter)
        redundancy = float(q0 + q2 - q1 - q3)
    else:
        redundancy = float(np.linalg.norm(design @ coef - y))
    return PhaseScanFit(complex(coef[1], coef[2]), float(coef[0]), offset_stderr, redundancy)


def _pair_overlap(records, F):
    if F is None:
        return 0.0
    s = records[0].setting
    return reference_overlap(F, s.t1, s.t2)


def reconstruct_offdiagonal(records, F=None, diagonals=None, diagonal_stderr=0.0):
    """Filtered coherence ``<Phi(t1)|rho|Phi(t2)>`` from a phase scan of one time pair.

    ``F`` supplies the pulse overlap entering the reference normalization;
    without it the pulses are taken as orthogonal. If the populations
    ``diagonals = (d1, d2)`` are given, the fitted ``d1 + d2`` is checked
    against them.
    """
    by_phase = {round(float(np.mod(r.setting.phi, 2 * np.pi)), 9) for r in records}
    missing = [p for p in DEFAULT_PHASES if round(p, 9) not in by_phase]
    if len(by_phase) < 4 and missing:
        raise ValueError(f"coherence scan is missing phases {missing}")
    fit = fit_phase_scan(records, _pair_overlap(records, F))
    if diagonals is not None:
        expected = diagonals[0] + diagonals[1]
        tol = 5.0 * np.hypot(fit.offset_stderr, diagonal_stderr) + 1e-9
        if abs(fit.offset - expected) > tol:
            raise InconsistentRecordError(
                f"phase-scan population sum {fit.offset:.6g} disagrees with single-pulse data ({expected:.6g})"
            )
    return fit.coherence


def _hermitian_project(mat):
    """Hermitize, clip negative eigenvalues, renormalize; returns (matrix, negativity mass)."""
    herm = 0.5 * (mat + mat.conj().T)
    evals, evecs = np.linalg.eigh(herm)
    total = float(np.sum(np.abs(evals)))
    negativity = float(-np.sum(evals[evals < 0]) / total) if total > 0 else 0.0
    clipped = np.clip(evals, 0.0, None)
    if clipped.sum() <= 0:
        raise ValueError("reconstructed matrix has no positive part")
    out = (evecs * clipped) @ evecs.conj().T
    out = 0.5 * (out + out.conj().T)
    return out / np.real(np.trace(out)), negativity


@dataclass(frozen=True, eq=False)
class TomographyResult:
    """Output bundle of :func:`assemble_density`.

    ``filtered`` is the support-time matrix ``<Phi(t_i)|rho|Phi(t_j)>`` made
    physical and normalized to unit trace; ``filtered_raw`` is the same before
    projection. ``density`` is the deconvolved grid-level state (``None``
    when deconvolution is off). ``unresolved_mass`` is the weight of the
    state orthogonal to every support pulse, which the support-time data
    cannot see. ``density_trace`` is the trace of the deconvolved kernel
    before renormalization: the weight of the state inside the kept
    frequency band, under the band-limited model.
    """

    times: tuple
    filtered: np.ndarray
    filtered_raw: np.ndarray
    negativity_mass: float
    unresolved_mass: float
    density: DensityMatrix | None = None
    density_negativity_mass: float | None = None
    density_trace: float | None = None
    redundancy: dict = field(default_factory=dict)


def _support_pulses(F, times):
    return np.array([F.pulse_at(t).amp for t in times])


def deconvolve_filtered(R, times, F, clip_threshold=1e-3):
    """Grid kernel of ``rho`` from filtered samples ``R`` at the support times.

    Solves ``R = E^H Q E`` for the band-limited kernel ``Q`` of
    ``F^dagger rho F`` in frequency (minimum-norm when under-determined) and
    divides by ``conj(f_k) f_l`` on bins with ``|f|^2 > clip_threshold * max``.
    Returns an un-normalized envelope kernel.
    """
    g = F.grid
    band = F.band_mask(clip_threshold)
    omegas = g.omegas[band]
    dw = g.domega
    E = np.exp(1j * np.outer(omegas, times)) * dw / np.sqrt(2.0 * np.pi)
    Einv = np.linalg.pinv(E)
    Q = Einv.conj().T @ R @ Einv
    f = F.eigenvalues[band]
    rho_w = Q / np.outer(f.conj(), f)
    # envelope samples from spectral amplitudes on the kept bins
    T = np.exp(-1j * np.outer(g.times, g.detunings[band])) * dw / np.sqrt(2.0 * np.pi)
    return T @ rho_w @ T.conj().T


def assemble_density(times, diagonals, offdiagonals, F, deconvolve=True, clip_threshold=1e-3, redundancy=None):
    """Combine populations and coherences into a :class:`TomographyResult`.

    ``offdiagonals`` maps index pairs ``(i, j)`` with ``i < j`` to the
    coherence ``<Phi(t_i)|rho|Phi(t_j)>``; every pair must be present.
    """
    times = tuple(float(t) for t in times)
    m = len(times)
    if m == 0:
        raise ValueError("empty schedule")
    diagonals = np.asarray(diagonals, dtype=float)
    if diagonals.shape != (m,):
        raise ValueError("need one population per support time")
    R = np.diag(diagonals).astype(complex)
    for i, j in combinations(range(m), 2):
        if (i, j) not in offdiagonals:
            raise ValueError(f"missing coherence for support pair {(i, j)}")
        c = complex(offdiagonals[(i, j)])
        R[i, j] = c
        R[j, i] = np.conj(c)

    filtered, negativity = _hermitian_project(R)
    pulses = _support_pulses(F, times)
    gram = pulses.conj() @ pulses.T * F.grid.dt
    resolved = float(np.real(np.trace(np.linalg.pinv(gram, rcond=1e-10, hermitian=True) @ R)))

    density = None
    density_negativity = None
    density_trace = None
    if deconvolve:
        kernel = deconvolve_filtered(R, np.array(times), F, clip_threshold)
        density_trace = float(np.real(np.trace(kernel)) * F.grid.dt)
        op, density_negativity = _hermitian_project(kernel * F.grid.dt)
        density = DensityMatrix(F.grid, op / F.grid.dt)
    return TomographyResult(
        times=times,
        filtered=filtered,
        filtered_raw=0.5 * (R + R.conj().T),
        negativity_mass=negativity,
        unresolved_mass=1.0 - resolved,
        density=density,
        density_negativity_mass=density_negativity,
        density_trace=density_trace,
        redundancy=dict(redundancy or {}),
    )


def _as_operator(x):
    if isinstance(x, DensityMatrix):
        return x.operator
    if isinstance(x, TemporalState):
        return DensityMatrix.from_pure(x).operator
    mat = np.asarray(x, dtype=complex)
    return mat / np.real(np.trace(mat))


def _psd_sqrt(mat):
    evals, evecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    # round-off eigenvalues of rank-deficient states would add ~sqrt(eps)
    evals = np.where(evals > 1e-13 * max(evals.max(), 0.0), evals, 0.0)
    return (evecs * np.sqrt(evals)) @ evecs.conj().T


def fidelity(a, b):
    """Uhlmann fidelity ``(Tr |sqrt(a) sqrt(b)|)^2``.

    Accepts :class:`DensityMatrix`, pure :class:`TemporalState` or a plain
    square matrix (normalized to unit trace here).
    """
    A = _as_operator(a)
    B = _as_operator(b)
    if A.shape != B.shape:
        raise ValueError("fidelity needs states on the same support")
    sv = np.linalg.svd(_psd_sqrt(A) @ _psd_sqrt(B), compute_uv=False)
    value = float(np.sum(sv) ** 2)
    return min(max(value, 0.0), 1.0)


class TemporalTomography(BaseEstimator):
    """Estimator wrapping the reconstruction pipeline.

    Parameters
    ----------
    filter_op : FilterOperator
        Filter of the reference pulses used to take the data.
    deconvolve : bool
        Also build the grid-level density matrix.
    clip_threshold : float
        Relative ``|f|^2`` level below which frequency bins are treated as
        unresolved during deconvolution.
    check_consistency : bool
        Cross-check each phase scan's offset against the populations.

    ``fit`` takes a sequence of :class:`RateRecord`; the support times are the
    delays of the single-pulse records. ``predict`` maps settings back to
    coincidence probabilities using the fitted state.
    """

    def __init__(self, filter_op=None, deconvolve=True, clip_threshold=1e-3, check_consistency=True):
        self.filter_op = filter_op
        self.deconvolve = deconvolve
        self.clip_threshold = clip_threshold
        self.check_consistency = check_consistency

    def fit(self, X, y=None):
        if self.filter_op is None:
            raise ValueError("filter_op is required")
        records = list(X)
        diag = sorted((r for r in records if r.is_delay), key=lambda r: r.setting)
        times = [float(r.setting) for r in diag]
        if len(set(times)) != len(times):
            raise ValueError("expected exactly one single-pulse record per support time")
        populations = reconstruct_diagonal(diag, self.filter_op)
        pop_err = np.array([2.0 * r.stderr for r in diag])
        index = {t: i for i, t in enumerate(times)}

        groups = {}
        for r in records:
            if r.is_delay:
                continue
            key = (r.setting.t1, r.setting.t2)
            if key[0] not in index or key[1] not in index:
                raise ValueError(f"coherence pair {key} is not on the support times")
            groups.setdefault(key, []).append(r)

        offdiag = {}
        redundancy = {}
        for (t1, t2), recs in groups.items():
            i, j = index[t1], index[t2]
            diags = (populations[i], populations[j]) if self.check_consistency else None
            c = reconstruct_offdiagonal(recs, self.filter_op, diags, float(np.hypot(pop_err[i], pop_err[j])))
            offdiag[(i, j)] = c
            redundancy[(t1, t2)] = fit_phase_scan(recs, _pair_overlap(recs, self.filter_op)).redundancy

        self.result_ = assemble_density(
            times, populations, offdiag, self.filter_op, self.deconvolve, self.clip_threshold, redundancy
        )
        self.times_ = tuple(times)
        self.rho_filtered_ = self.result_.filtered
        self.density_ = self.result_.density
        self.negativity_mass_ = self.result_.negativity_mass
        return self

    def predict(self, X):
        """Coincidence probabilities at the given settings.

        Uses the deconvolved state when available; otherwise only settings on
        the support times can be evaluated, from the raw filtered matrix.
        """
        check_is_fitted(self, "result_")
        out = []
        for setting in X:
            if self.density_ is not None:
                out.append(forward_probability(self.density_, self.filter_op, setting))
                continue
            R = self.result_.filtered_raw
            idx = {t: i for i, t in enumerate(self.times_)}
            if isinstance(setting, CoherenceSetting):
                i, j = idx[setting.t1], idx[setting.t2]
                v = R[i, i].real + R[j, j].real + 2.0 * np.real(np.exp(1j * setting.phi) * R[i, j])
                out.append(0.5 - 0.5 * v / superposition_norm(self.filter_op, setting))
            else:
                i = idx[float(setting)]
                out.append(0.5 - 0.5 * R[i, i].real)
        return np.array(out)

    def score(self, X, y=None):
        """Negative mean squared residual between recorded and predicted rates."""
        records = list(X)
        pred = self.predict([r.setting for r in records])
        rates = np.array([r.rate for r in records])
        return -float(np.mean((pred - rates) ** 2))
