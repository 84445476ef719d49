import numpy as np
import pytest

from traitevo.grid import Grid1D

ACCEPTANCE_LINES = []


@pytest.fixture
def grid():
    return Grid1D.symmetric(2.0, 0.02)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
