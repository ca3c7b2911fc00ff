import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from uqdiscord import randgen


@pytest.fixture
def ghz():
    return randgen.ghz()


@pytest.fixture
def w():
    return randgen.w_state()


@pytest.fixture
def bell():
    return randgen.bell()


def dm(labels, dims, mat):
    from uqdiscord import DensityOperator
    return DensityOperator(labels, np.asarray(mat, dtype=complex), dims=dims)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(pytestconfig):
    return pytestconfig.stash.setdefault(ACCEPTANCE_LINES, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
