import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def unit(i, n):
    e = np.zeros(n)
    e[i] = 1.0
    return e


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
