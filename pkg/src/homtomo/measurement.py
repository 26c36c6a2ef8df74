"""Bunching observables of a signal photon interfering with a reference photon."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_same_grid
from .grid import MeasurementOperator, expectation


@dataclass(frozen=True)
class CoherenceSetting:
    """Two reference times and the relative phase of the second pulse.

    Stored with ``t1 < t2``; swapping the times is the same measurement with
    the phase reversed, so out-of-order input is canonicalized.
    """

    t1: float
    t2: float
    phi: float

    def __post_init__(self):
        if self.t1 == self.t2:
            raise ValueError("coherence setting needs t1 != t2")
        if self.t1 > self.t2:
            t1, t2 = self.t2, self.t1
            object.__setattr__(self, "t1", float(t1))
            object.__setattr__(self, "t2", float(t2))
            object.__setattr__(self, "phi", -float(self.phi))


def bunching_operator(ref):
    """Time-integrated coincidence observable ``1/2 - 1/2 |ref><ref|``."""
    if ref.unnormalized:
        raise ValueError("reference state must be normalized")
    return MeasurementOperator(ref.grid, 0.5, [-0.5], ref.amp[None, :])


def delayed_operator(F, t):
    """Coincidence observable for the reference pulse delayed to time ``t``."""
    return bunching_operator(F.pulse_at(t))


def coherence_operator(F, setting):
    """``1/2 - 1/4 F(|t1><t1| + e^{-i phi}|t1><t2| + e^{i phi}|t2><t1| + |t2><t2|)F^dagger``.

    The bracket is ``|v><v|`` with ``v = F|t1> + e^{i phi} F|t2>``. When the two
    pulses overlap, ``|v|^2 != 2`` and this is not a scaled projector; the
    literal form is kept regardless.
    """
    v = F.pulse_at(setting.t1).amp + np.exp(1j * setting.phi) * F.pulse_at(setting.t2).amp
    return MeasurementOperator(F.grid, 0.5, [-0.25], v[None, :])


def reference_overlap(F, t1, t2):
    """``<Phi(t1)|Phi(t2)>``, zero for well-separated pulses."""
    g = F.grid
    return complex(np.vdot(F.pulse_at(t1).amp, F.pulse_at(t2).amp) * g.dt)


def superposition_norm(F, setting):
    """``|v|^2 = 2 + 2 Re(e^{i phi} <Phi(t1)|Phi(t2)>)`` for ``v = F|t1> + e^{i phi} F|t2>``."""
    s = reference_overlap(F, setting.t1, setting.t2)
    return 2.0 + 2.0 * float(np.real(np.exp(1j * setting.phi) * s))


def superposition_operator(F, setting):
    """Bunching observable of the normalized two-time reference ``v / |v|``.

    This is the measurement a single reference photon actually realizes. It
    agrees with :func:`coherence_operator` when the two pulses are
    orthogonal and stays a valid probability when they overlap.
    """
    v = F.pulse_at(setting.t1).amp + np.exp(1j * setting.phi) * F.pulse_at(setting.t2).amp
    norm = float(np.sum(np.abs(v) ** 2)) * F.grid.dt
    if norm < 1e-12:
        raise ValueError("the two reference branches cancel; superposition has no norm")
    return MeasurementOperator(F.grid, 0.5, [-0.5 / norm], v[None, :])


def coincidence_probability(rho, op):
    return expectation(op, rho)


def hom_scan(rho, F, delays):
    """Coincidence probability for each reference delay, in input order."""
    check_same_grid(rho, F)
    return [(float(t), expectation(delayed_operator(F, t), rho)) for t in delays]


def joint_detection_density(signal, ref):
    """``G2(t1, t2)`` on the grid for reference in port 1 and signal in port 2.

    With ``b_1 = (a_1 + a_2)/sqrt 2`` and ``b_2 = (a_1 - a_2)/sqrt 2`` the
    two-photon detection amplitude is ``(phi(t2) psi(t1) - phi(t1) psi(t2))/2``.
    Entry ``[j, k]`` is the density for the port-1 click at ``t_j`` and the
    port-2 click at ``t_k``. Physical field samples are used; the carrier only
    contributes a common phase.
    """
    check_same_grid(signal, ref)
    phi = ref.field()
    psi = signal.field()
    amp = 0.5 * (np.outer(psi, phi) - np.outer(phi, psi))
    return np.abs(amp) ** 2


def g2_bruteforce(signal, ref):
    """Coincidence probability by double quadrature of the joint detection density."""
    dt = signal.grid.dt
    return float(joint_detection_density(signal, ref).sum() * dt * dt)


def projection_kernel(ref, j, k):
    """Signal-space kernel ``<t_a|Pi_s(t_j, t_k)|t_b>`` for detections at samples ``j`` and ``k``.

    ``Pi_s = 1/4 |chi><chi|`` with ``|chi> = phi*(t_k)|t_j> - phi*(t_j)|t_k>``,
    so that ``<psi|Pi_s|psi>`` reproduces :func:`joint_detection_density`.
    """
    g = ref.grid
    phi = ref.field()
    chi = np.zeros(g.n_points, dtype=complex)
    # amplitude of |t_j> in the envelope frame includes its carrier phase
    carrier = np.exp(1j * g.omega0 * g.times)
    chi[j] += np.conj(phi[k]) * carrier[j] / g.dt
    chi[k] -= np.conj(phi[j]) * carrier[k] / g.dt
    return 0.25 * np.outer(chi, chi.conj())
