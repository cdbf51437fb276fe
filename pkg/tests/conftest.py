import numpy as np
import pytest

from albeam import (ImageGrid, PhantomSpec, delay_compensate, desk_probe,
                    synthesize_frame)


@pytest.fixture(scope="session")
def probe():
    return desk_probe()


@pytest.fixture(scope="session")
def grid(probe):
    return ImageGrid.for_probe(probe)


@pytest.fixture(scope="session")
def point_phantom():
    return PhantomSpec(point_targets=((0.0, 0.02, 1.0),))


@pytest.fixture(scope="session")
def point_frame(point_phantom, probe):
    return synthesize_frame(point_phantom, probe, max_depth=0.03)


@pytest.fixture(scope="session")
def point_tensor(point_frame, grid):
    return delay_compensate(point_frame, grid)


@pytest.fixture(scope="session")
def speckle_phantom():
    return PhantomSpec(point_targets=((0.0, 0.02, 1.0),),
                       speckle_density=3.0, rng_seed=7)


@pytest.fixture(scope="session")
def speckle_frame(speckle_phantom, probe):
    return synthesize_frame(speckle_phantom, probe, max_depth=0.03)


@pytest.fixture(scope="session")
def speckle_tensor(speckle_frame, grid):
    return delay_compensate(speckle_frame, grid)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


_MEASUREMENTS: list[str] = []


@pytest.fixture(scope="session")
def measure():
    """Collector for one-line measurements echoed after the test run."""
    return _MEASUREMENTS.append


def pytest_terminal_summary(terminalreporter):
    if _MEASUREMENTS:
        terminalreporter.section("acceptance measurements")
        for line in _MEASUREMENTS:
            terminalreporter.write_line(line)
