import numpy as np
import pytest

from steerlab.linalg import random_unitary

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_target(rng, min_p=1e-3):
    """Random orthonormal basis (columns) and simplex weights, all above ``min_p``."""
    basis = random_unitary(4, rng)
    while True:
        p = rng.dirichlet(np.ones(4))
        if p.min() > min_p:
            return basis, p


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
