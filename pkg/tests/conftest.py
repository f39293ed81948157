import numpy as np
import pytest

from wavegrow.presets import random_smooth
from wavegrow.spectral import GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[(1, 64, 4.0), (2, 16, 3.0), (3, 8, 2.5)], ids=["1d", "2d", "3d"])
def grid(request):
    return GridSpec(*request.param)


@pytest.fixture
def grid1d():
    return GridSpec(1, 128, 8.0)


def random_state(grid, rng, amplitude=1.0):
    return random_smooth(grid, rng, amplitude=amplitude)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the summary is printed after the run."""
    results = request.config.stash[ACCEPTANCE_KEY]

    def record(number, passed, detail):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        results[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[ACCEPTANCE_KEY]
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
