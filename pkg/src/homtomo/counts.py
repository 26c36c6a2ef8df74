"""Finite-statistics coincidence records from exact probabilities.

Each setting gets its own Philox stream keyed by ``(seed, setting_index)``,
so the draw for one setting does not depend on which other settings were
simulated or in what order.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RateRecord:
    """Measured coincidence rate at one setting.

    ``setting`` is a float delay for single-pulse references or a
    :class:`~homtomo.measurement.CoherenceSetting` for two-time references.
    """

    setting: object
    rate: float
    stderr: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"rate must lie in [0, 1], got {self.rate}")
        if not self.stderr >= 0.0:
            raise ValueError(f"stderr must be >= 0, got {self.stderr}")
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "stderr", float(self.stderr))

    @property
    def is_delay(self):
        return not hasattr(self.setting, "phi")

    def consistent(self, tol=1e-9):
        """Coincidences from one photon per input port cannot exceed 1/2."""
        return self.rate - 2.0 * self.stderr <= 0.5 + tol


@dataclass(frozen=True)
class TrialPlan:
    trials_per_setting: int
    seed: int

    def __post_init__(self):
        if int(self.trials_per_setting) != self.trials_per_setting or self.trials_per_setting < 1:
            raise ValueError("trials_per_setting must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def _generator(seed, setting_index):
    key = np.array([int(seed), int(setting_index) % 2**64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_rate(p, plan, setting_index, setting=None):
    """Binomial coincidence count turned into a :class:`RateRecord`."""
    if not -1e-12 <= p <= 1.0 + 1e-12:
        raise ValueError(f"probability {p} outside [0, 1]")
    p = min(max(float(p), 0.0), 1.0)
    trials = int(plan.trials_per_setting)
    count = int(_generator(plan.seed, setting_index).binomial(trials, p))
    rate = count / trials
    stderr = float(np.sqrt(rate * (1.0 - rate) / trials))
    return RateRecord(setting, rate, stderr)


def exact_record(p, setting=None):
    if not -1e-12 <= p <= 1.0 + 1e-12:
        raise ValueError(f"probability {p} outside [0, 1]")
    p = min(max(float(p), 0.0), 1.0)
    return RateRecord(setting, p, 0.0)
