import numpy as np
import pytest
from hypothesis import strategies as st

from leftcurtain.instances import random_pair, three_point, two_atom, trivial_uniform
from leftcurtain.curtain import build_left_curtain


@pytest.fixture
def three():
    mu, nu = three_point()
    return mu, nu, build_left_curtain(mu, nu)


@pytest.fixture
def pair():
    mu, nu = two_atom()
    return mu, nu, build_left_curtain(mu, nu)


@pytest.fixture(scope="session")
def uniform_instance():
    mu, nu = trivial_uniform(2000)
    return mu, nu, build_left_curtain(mu, nu)


def pairs(max_mu=10, max_nu=40):
    """Hypothesis strategy for convex-ordered pairs built by martingale splitting."""
    return st.integers(0, 2**32 - 1).map(
        lambda s: random_pair(np.random.default_rng(s), max_mu=max_mu, max_nu=max_nu))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
