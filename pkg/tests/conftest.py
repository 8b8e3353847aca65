import numpy as np
import pytest

from bpcodes import codes


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def hamming():
    return codes.builtin("hamming_7_4")


@pytest.fixture(scope="session")
def ldpc():
    return codes.builtin("ldpc_32_16")


@pytest.fixture(scope="session")
def bch():
    return codes.builtin("bch_63_45")


def random_binary(rng, m, n, p=0.4):
    return (rng.random((m, n)) < p).astype(np.uint8)


# PASS/FAIL lines from test_acceptance.py, echoed again after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
