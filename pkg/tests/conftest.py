import warnings

import numpy as np
import pytest

from esfts.core import FtsProblem, MatrixSchedule, TimeGrid
from esfts.dlmi import scan_gain
from esfts.examples import get_example
from esfts.geometry import InterpolationWarning, shrunk_gamma


def scalar_problem(a=0.5, b=1.0, g=1.0, rho=2.0, T=1.0, Delta=0.01):
    """One-state plant with a closed-form FTS threshold (see test_dlmi)."""
    return FtsProblem(A=MatrixSchedule.constant([[a]]), B=MatrixSchedule.constant([[b]]),
                      R=np.array([[rho]]), Gamma=MatrixSchedule.constant([[g]]), Pi=None,
                      t0=0.0, T=T, Delta=Delta, name="scalar")


@pytest.fixture(scope="session")
def ex3_synthesis():
    ex = get_example("ex3")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InterpolationWarning)
        spec = shrunk_gamma(ex.problem, ex.grid)
    return ex.problem, scan_gain(ex.problem, spec, ex.grid, step=0.01)


@pytest.fixture
def grid10():
    return TimeGrid(0.0, 10.0, 100)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
