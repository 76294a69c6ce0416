import numpy as np
import pytest

from curveclust import DesignSpec, build_designs, gen_three_class


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture(scope="session")
def three_class_small():
    return gen_three_class(100, seed=11)


@pytest.fixture(scope="session")
def poly4_designs(three_class_small):
    return build_designs(three_class_small, DesignSpec.polynomial(4))


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
