import numpy as np
import pytest

from forcemap import ForceSafetyMap, load_example_scene
from forcemap.geometry2d import ConvexPolygon


@pytest.fixture(scope="session")
def example_cfg():
    return load_example_scene()


@pytest.fixture(scope="session")
def example_map(example_cfg):
    # full 1 degree build, shared by every test that needs it
    return ForceSafetyMap(example_cfg).fit()


@pytest.fixture
def unit_square():
    return ConvexPolygon([[0, 0], [1, 0], [1, 1], [0, 1]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
