import math

import numpy as np
import pytest

from normwave import models as M
from normwave.grid import SpectralGrid

from conftest import SOLITON_OMEGA, soliton

# closed-form integrals of sech^{2n}: 4/3, 16/15, 32/35 for n = 2, 3, 4
_A = 1 / math.sqrt(20)
_C = math.sqrt(0.3)
SOLITON_D1 = 4 * _C**2 * _A * (4 / 3 - 16 / 15)
SOLITON_D2 = _C**2 * _A**3 * (16 * 4 / 3 - 48 * 16 / 15 + 36 * 32 / 35)
SOLITON_L4 = _C**4 / _A * 32 / 35
SOLITON_ENERGY = 0.5 * (SOLITON_D2 + SOLITON_D1) - SOLITON_L4 / 4


def test_model_validation():
    with pytest.raises(ValueError):
        M.Kawahara(1.0, 1.0)
    with pytest.raises(ValueError):
        M.MixedNLS(0, 1.0, 3.0)
    with pytest.raises(ValueError):
        M.MixedNLS(1, -1.0, 3.0)
    with pytest.raises(ValueError):
        M.LaplacianNLS(1.0, 3.0, dim=3)
    assert M.Kawahara(1.0, 3.0).dim == 1


def test_symbols():
    g = SpectralGrid(2, 64, 20.0)
    k1, k2 = g.wavenumbers
    k2sum = k1**2 + k2**2
    assert np.allclose(M.symbol(M.MixedNLS(1, 2.0, 3.0, dim=2), g), k2sum**2 - 4 * k1**2)
    assert np.allclose(M.symbol(M.LaplacianNLS(-0.5, 3.0, dim=2), g), k2sum**2 + 0.5 * k2sum)
    g1 = SpectralGrid(1, 64, 20.0)
    (k,) = g1.wavenumbers
    assert np.allclose(M.symbol(M.Kawahara(1.5, 2.0), g1), k**4 - 1.5 * k**2)
    with pytest.raises(ValueError):
        M.symbol(M.Kawahara(1.0, 2.0), g)


@pytest.mark.parametrize("model", [
    M.Kawahara(1.0, 2.0), M.Kawahara(-2.0, 2.0), M.Kawahara(3.0, 2.0),
    M.MixedNLS(1, 1.5, 3.0), M.MixedNLS(-1, 1.5, 3.0), M.LaplacianNLS(2.0, 2.0),
])
def test_symbol_floor_matches_dense_scan(model):
    k = np.linspace(-10, 10, 400001)
    c = model.second_order_coefficient
    assert M.symbol_floor(model) == pytest.approx(np.min(k**4 - c * k**2), abs=1e-8)


def test_energy_of_zero():
    g = SpectralGrid(1, 64, 10.0)
    assert M.energy(M.Kawahara(1.0, 3.0), g, np.zeros(64)) == 0.0
    assert np.all(M.energy_gradient(M.Kawahara(1.0, 3.0), g, np.zeros(64)) == 0.0)
    assert M.el_residual(M.Kawahara(1.0, 3.0), g, np.zeros(64), 0.7) == (0.0, 0.0)


def test_soliton_energy_closed_form(wide_grid):
    phi = soliton(wide_grid)
    model = M.Kawahara(-1.0, 3.0)
    assert M.energy(model, wide_grid, phi) == pytest.approx(SOLITON_ENERGY, rel=1e-9)
    assert M.second_order_energy(model, wide_grid, phi) == pytest.approx(-SOLITON_D1, rel=1e-9)
    assert M.bilaplacian_energy(wide_grid, phi) == pytest.approx(SOLITON_D2, rel=1e-9)


def test_soliton_gradient_is_multiple_of_profile(wide_grid, soliton_model):
    phi = soliton(wide_grid)
    g = M.energy_gradient(soliton_model, wide_grid, phi)
    assert np.max(np.abs(g + SOLITON_OMEGA * phi)) < 1e-8


def test_soliton_omega(wide_grid, soliton_model):
    assert abs(M.omega_from_field(soliton_model, wide_grid, soliton(wide_grid)) - SOLITON_OMEGA) <= 1e-9


def test_residual_at_wrong_omega(wide_grid, soliton_model):
    sup, _ = M.el_residual(soliton_model, wide_grid, soliton(wide_grid), 0.2)
    assert sup == pytest.approx(0.04 * math.sqrt(0.3), rel=1e-8)


def test_residual_rejects_nonfinite_omega(wide_grid, soliton_model):
    with pytest.raises(ValueError):
        M.el_residual(soliton_model, wide_grid, soliton(wide_grid), float("nan"))


def test_omega_zero_field_errors():
    g = SpectralGrid(1, 64, 10.0)
    with pytest.raises(ValueError):
        M.omega_from_field(M.Kawahara(1.0, 3.0), g, np.zeros(64))


def _smooth(grid, seed):
    rng = np.random.default_rng(seed)
    x = grid.x1
    return np.exp(-x**2 / 6) * (rng.uniform(0.5, 1.5) + 0.4 * np.sin(rng.uniform(0.5, 2) * x))


def test_omega_scaling_identity():
    g = SpectralGrid(1, 256, 40.0)
    model = M.Kawahara(0.7, 2.5)
    f = _smooth(g, 3)
    c = 1.7
    lam = g.mass(f)
    expected = (c ** (model.p - 1) * g.lp_norm(f, model.p + 1) ** (model.p + 1)
                - M.quadratic_part(model, g, f)) / lam
    assert M.omega_from_field(model, g, c * f) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_residual_orthogonal_to_field(seed):
    g = SpectralGrid(1, 256, 40.0)
    model = M.MixedNLS(1, 0.8, 3.0)
    f = _smooth(g, seed)
    om = M.omega_from_field(model, g, f)
    r = M.el_residual_field(model, g, f, om)
    scale = g.inner(np.abs(M.energy_gradient(model, g, f)), np.abs(f)) + abs(om) * g.mass(f)
    assert abs(g.inner(r, f)) < 1e-10 * scale


@pytest.mark.parametrize("seed", range(3))
def test_gradient_pairing_identity(seed):
    g = SpectralGrid(1, 256, 40.0)
    model = M.Kawahara(1.0, 3.0)
    f = _smooth(g, seed)
    lhs = g.inner(M.energy_gradient(model, g, f), f)
    rhs = M.quadratic_part(model, g, f) - g.lp_norm(f, 4) ** 4
    assert lhs == pytest.approx(rhs, rel=1e-10)


def _central_difference_order(model, grid, f, delta, hs=(1e-3, 1e-4)):
    exact = grid.inner(M.energy_gradient(model, grid, f), delta)
    errs = []
    for h in hs:
        fd = (M.energy(model, grid, f + h * delta) - M.energy(model, grid, f - h * delta)) / (2 * h)
        errs.append(abs(fd - exact))
    return math.log(errs[0] / errs[1]) / math.log(hs[0] / hs[1])


def test_gradient_central_difference_order():
    g = SpectralGrid(1, 256, 40.0)
    for model in (M.Kawahara(1.0, 3.0), M.MixedNLS(-1, 1.0, 3.0), M.LaplacianNLS(0.5, 2.5)):
        f = 2 * _smooth(g, 11)
        delta = _smooth(g, 12) * np.cos(g.x1)
        assert _central_difference_order(model, g, f, delta) >= 1.9


def test_regime_table():
    R = M.Regime
    cases = [
        (M.Kawahara(1.0, 3.0), R.WellPosedAllLambda),
        (M.Kawahara(1.0, 5.0), R.LargeLambdaOnly),
        (M.Kawahara(1.0, 9.0), R.EnergyUnboundedBelow),
        (M.LaplacianNLS(1.0, 4.0, dim=2), R.LargeLambdaOnly),
        (M.LaplacianNLS(1.0, 2.9, dim=2), R.WellPosedAllLambda),
        (M.MixedNLS(1, 1.0, 5.0, dim=1), R.LargeLambdaOnly),
        (M.MixedNLS(1, 1.0, 9.0, dim=1), R.EnergyUnboundedBelow),
        (M.MixedNLS(1, 1.0, 1 + 8 / 3, dim=2), R.LargeLambdaOnly),
    ]
    for model, expected in cases:
        assert M.validity_regime(model) is expected, model.tag()
    assert M.at_threshold(M.Kawahara(1.0, 5.0))
    assert not M.at_threshold(M.Kawahara(1.0, 4.0))


@pytest.mark.parametrize("b", [1.0, -1.0, 2.0])
def test_symbol_positivity_scan(b):
    g = SpectralGrid(1, 512, 80.0)
    model = M.Kawahara(b, 2.0)
    S = M.symbol(model, g)
    bound = M.omega_lower_bound(model)
    assert bound == (b * b / 4 if b > 0 else 0.0)
    assert np.min(S + bound + 1e-6) > 0
    if b == 1.0:
        # k = 9 * 2pi/80 sits within 2e-4 of the minimizing wavenumber 1/sqrt(2)
        assert np.min(S + bound - 1e-6) < 0


def test_wave_from_field(wide_grid, soliton_model):
    w = M.Wave.from_field(soliton_model, wide_grid, soliton(wide_grid))
    assert abs(wide_grid.mass(w.field) - w.lam) < 1e-10 * w.lam
    sup, l2 = M.el_residual(soliton_model, wide_grid, w.field, w.omega)
    assert (sup, l2) == (w.el_residual_sup, w.el_residual_l2)
    assert w.solver is M.SolverKind.Imported
    assert w.lp_p1 == pytest.approx(SOLITON_L4, rel=1e-10)


def test_dealias_toggle_changes_only_high_modes():
    g = SpectralGrid(1, 256, 40.0, dealias=True)
    f = _smooth(g, 4)
    model = M.Kawahara(1.0, 3.0)
    plain = np.sign(f) * np.abs(f) ** 3
    filtered = M.nonlinearity(model, g, f)
    assert np.max(np.abs(plain - filtered)) < 1e-10
