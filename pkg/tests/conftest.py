import numpy as np
import pytest

from relaxshock import (broadwell_model, build_reduced, hugoniot_endstates, jin_xin_model,
                        ns_profile)
from relaxshock.solver import SolverOptions, run_pipeline

EPSILONS = (0.05, 0.1, 0.2)
ACCEPTANCE_LINES = []


def exact_jin_xin(x, eps):
    """Exact standing shock of Jin-Xin with a = 1 and Burgers flux."""
    u = -0.5 * eps * np.tanh(eps * x / 4.0)
    return u, np.full_like(x, eps**2 / 8.0)


@pytest.fixture(scope="session")
def jx():
    m = jin_xin_model()
    return m, build_reduced(m)


@pytest.fixture(scope="session")
def bw():
    m = broadwell_model()
    return m, build_reduced(m)


@pytest.fixture(scope="session")
def jx_profiles(jx):
    m, red = jx
    return {eps: ns_profile(red, m, hugoniot_endstates(red, m, eps)) for eps in EPSILONS}


@pytest.fixture(scope="session")
def bw_profile(bw):
    m, red = bw
    return ns_profile(red, m, hugoniot_endstates(red, m, 0.1))


@pytest.fixture(scope="session")
def jx_sweep(jx):
    m, red = jx
    return {eps: run_pipeline(m, eps, SolverOptions(), red) for eps in EPSILONS}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
