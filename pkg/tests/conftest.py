import numpy as np
import pytest

from hjbr import P1, build_example1, build_example2


@pytest.fixture
def params():
    return P1


@pytest.fixture
def ex1():
    return build_example1(P1)


@pytest.fixture
def ex2():
    return build_example2(P1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


@pytest.fixture
def record():
    """Store (and print) one acceptance line; ``record(n, ok, detail)``."""
    def _record(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[n] = line
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
