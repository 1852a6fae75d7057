import numpy as np
import pytest

from tfc_descent import (
    BoundaryConditions, OuterSettings, ProfileKind, ProfileMode, solve, reference_lander,
)

ZERO = [0.0, 0.0, 0.0]


@pytest.fixture(scope="session")
def lander():
    return reference_lander()


@pytest.fixture(scope="session")
def bc1():
    return BoundaryConditions([-900.0, 100.0, 1500.0], [30.0, -10.0, -70.0], ZERO, ZERO, 1905.0)


@pytest.fixture(scope="session")
def bc2():
    return BoundaryConditions([-200.0, 100.0, 1500.0], [85.0, 50.0, -65.0], ZERO, ZERO, 1905.0)


@pytest.fixture(scope="session")
def sol1(lander, bc1):
    return solve(bc1, lander, OuterSettings(profile_mode=ProfileMode.MIN_MAX))


@pytest.fixture(scope="session")
def sol2(lander, bc2):
    return solve(bc2, lander, OuterSettings(profile_mode=ProfileMode.MAX_MIN_MAX))


@pytest.fixture(scope="session")
def solutions(sol1, sol2, bc1, bc2):
    return {ProfileKind.MIN_MAX: (sol1, bc1), ProfileKind.MAX_MIN_MAX: (sol2, bc2)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def auto1(lander, bc1):
    return solve(bc1, lander, OuterSettings())


@pytest.fixture(scope="session")
def auto2(lander, bc2):
    return solve(bc2, lander, OuterSettings())


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
