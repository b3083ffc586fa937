import numpy as np
import pytest

from greedyapprox import Dictionary, SpaceContext


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def e3():
    return SpaceContext.euclidean(3)


def canonical_atoms(dim):
    ctx = SpaceContext.euclidean(dim)
    return ctx, Dictionary.canonical(dim).materialize(ctx)


# lines registered by test_acceptance, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("#")[1].split()[0])):
        terminalreporter.write_line(line)
