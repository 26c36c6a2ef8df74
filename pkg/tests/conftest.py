import numpy as np
import pytest

from homtomo.grid import TemporalState, TimeGrid
from homtomo.reference import ReferenceSpec, filter_from_pulse, make_pulse


@pytest.fixture
def grid():
    return TimeGrid.centered(256, 1.0, 10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


@pytest.fixture
def gauss_filter(grid):
    return filter_from_pulse(make_pulse(grid, ReferenceSpec.gaussian(2.0)))


def random_state(grid, rng):
    amp = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
    return TemporalState(grid, amp, unnormalized=True).normalize()


def gaussian_state(grid, tau, center=0.0):
    env = np.exp(-((grid.times - center) ** 2) / (4 * tau**2)) * np.exp(1j * grid.omega0 * center)
    return TemporalState(grid, env, unnormalized=True).normalize()


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS):
        terminalreporter.write_line(line)
