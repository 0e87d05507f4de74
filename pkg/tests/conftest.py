import numpy as np
import pytest

from doubleraman.core import make_rb87

# Acceptance checks register one line each here; they are printed in the
# terminal summary so that every criterion reports PASS/FAIL even when the
# output of passing tests is captured.
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def atom():
    return make_rb87()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
