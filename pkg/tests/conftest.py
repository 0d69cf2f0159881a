import numpy as np
import pytest

from torus_ma.grid import TorusGrid
from torus_ma.solver import ProblemData
from torus_ma.testbeds import CosineMode, CosinePotential


def random_positive_field(grid, rng, lo=0.5):
    """Pointwise Hermitian matrices ``A A^* + lo I`` with random complex ``A``."""
    n = grid.n
    a = rng.normal(size=grid.shape + (n, n)) + 1j * rng.normal(size=grid.shape + (n, n))
    h = a @ np.conj(np.swapaxes(a, -1, -2)) / n
    return h + lo * np.eye(n)


def cos_potential(n, amp, freq, phase=0.0):
    return CosinePotential([CosineMode(amp, tuple(freq), phase)], n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def perturbed_n1():
    """n = 1, N = 32, phi = 0.05 cos(2 pi x)."""
    grid = TorusGrid(1, 32)
    pot = cos_potential(1, 0.05, (1, 0))
    return ProblemData.from_metric(grid, pot.grid_metric(grid)), pot


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
