import numpy as np
import pytest

from ivbandits import make_interpolation, make_jump_around

MOTIVATING_THETA = [1.0, -0.95, 0.0, 0.45, 0.95, 0.99]
EXP1_THETA = [1.0, -0.95, 0.45, 0.45, 0.95, 0.45]
EXP1U_THETA = [1.0, -0.95, 0.45, 0.45, 0.9, 0.45]
EXP2_THETA = [0.5, 0.583, 0.67, 0.75]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def motivating():
    return make_jump_around(6, MOTIVATING_THETA, np.sqrt(0.35))


@pytest.fixture(scope="session")
def exp1_known():
    return make_jump_around(6, EXP1_THETA, np.sqrt(0.275))


@pytest.fixture(scope="session")
def exp1_unknown():
    return make_jump_around(6, EXP1U_THETA, np.sqrt(0.275))


@pytest.fixture(scope="session")
def interp1():
    return make_interpolation(4, EXP2_THETA, 1.0)


def random_stochastic(rng, d, diag=2.0):
    """Row-stochastic matrix with a dominant diagonal (well conditioned)."""
    G = rng.random((d, d)) + diag * np.eye(d)
    return G / G.sum(axis=1, keepdims=True)


_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """``report(number, passed, detail)`` prints and records one pass/fail line."""
    def report(number, passed, detail):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
