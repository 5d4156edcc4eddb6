import numpy as np
import pytest

from rtdp_lab.mdp import RngStream


@pytest.fixture
def rng():
    return RngStream(1234)


@pytest.fixture
def np_rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def record_criterion(number: int, passed: bool, detail: str):
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
