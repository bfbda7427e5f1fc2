import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mhqwalk.ising import IsingModel, build_chain, build_random_sparse

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_model(rng: np.random.Generator, n: int, k_max: int = 3) -> IsingModel:
    """Mixed-arity model with a few random terms, for property checks."""
    terms = []
    for _ in range(rng.integers(1, 2 * n + 1)):
        k = int(rng.integers(1, min(k_max, n) + 1))
        omega = tuple(int(i) for i in rng.choice(n, size=k, replace=False))
        terms.append((float(rng.normal()), omega))
    return IsingModel(n, tuple(terms))


@pytest.fixture
def chain3():
    return build_chain(3)


@pytest.fixture
def sparse6():
    return build_random_sparse(6, rng_seed=3)
