import math

import numpy as np
import pytest

from normwave import minimize as mn
from normwave import models as M
from normwave.grid import SpectralGrid

SOLITON_OMEGA = 4 / 25
SOLITON_LAMBDA = 4 / math.sqrt(5)


def soliton(grid):
    x = grid.x1
    return math.sqrt(0.3) / np.cosh(x / math.sqrt(20.0)) ** 2


def soliton_derivative(x, order):
    """Derivatives of sqrt(3/10) sech^2(x/sqrt(20)) in closed form."""
    a = 1 / math.sqrt(20.0)
    s = 1 / np.cosh(a * x)
    t = np.tanh(a * x)
    c = math.sqrt(0.3)
    if order == 0:
        return c * s**2
    if order == 1:
        return -2 * c * a * s**2 * t
    if order == 2:
        return c * a**2 * (4 * s**2 - 6 * s**4)
    raise ValueError(order)


@pytest.fixture(scope="session")
def wide_grid():
    return SpectralGrid(1, 1024, 160.0)


@pytest.fixture(scope="session")
def soliton_model():
    return M.MixedNLS(-1, 1.0, 3.0)


@pytest.fixture(scope="session")
def soliton_wave(wide_grid, soliton_model):
    return M.Wave.from_field(soliton_model, wide_grid, soliton(wide_grid), omega=SOLITON_OMEGA)


@pytest.fixture(scope="session")
def small_grid():
    return SpectralGrid(1, 256, 120.0)


@pytest.fixture(scope="session")
def kawahara_wave():
    grid = SpectralGrid(1, 256, 80.0)
    return mn.normalized_gradient_flow(M.Kawahara(1.0, 2.0), grid, 1.0)


@pytest.fixture(scope="session")
def small_soliton_wave(small_grid, soliton_model):
    return M.Wave.from_field(soliton_model, small_grid, soliton(small_grid), omega=SOLITON_OMEGA)


@pytest.fixture(scope="session")
def small_soliton_pair(small_soliton_wave):
    from normwave import linops
    return linops.assemble(small_soliton_wave.model, small_soliton_wave)


_ACCEPTANCE_LINES = []


def record_acceptance(line):
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
