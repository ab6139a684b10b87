import math
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from halfns.grid import HalfSpaceGrid

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TWO_PI = 2 * math.pi


@pytest.fixture(autouse=True)
def _quiet_truncation_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


@pytest.fixture(scope="session")
def desk():
    return HalfSpaceGrid(2, TWO_PI, 128, TWO_PI, 96)


@pytest.fixture(scope="session")
def small():
    return HalfSpaceGrid(2, TWO_PI, 32, TWO_PI, 32)


@pytest.fixture(scope="session")
def tall():
    return HalfSpaceGrid(2, TWO_PI, 32, 2 * TWO_PI, 96)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
