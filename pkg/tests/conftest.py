import warnings

import numpy as np
import pytest

from fiolab import BoundaryMassWarning, Grid

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


@pytest.fixture(scope="session")
def grid1():
    return Grid(1, 1024, 8.0)


@pytest.fixture(scope="session")
def grid2():
    return Grid(2, 64, 4.0)


@pytest.fixture(autouse=True)
def _quiet_boundary():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryMassWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
