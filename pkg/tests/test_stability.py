import json

import numpy as np
import pytest

from normwave import linops as LO
from normwave import minimize as mz
from normwave import models as M
from normwave import stability as ST
from normwave.grid import SpectralGrid

LAMBDA0 = 4 / 5 ** 0.5


@pytest.fixture(scope="module")
def kawahara_report():
    g = SpectralGrid(1, 512, 80.0)
    w = mz.normalized_gradient_flow(M.Kawahara(-1.0, 3.0), g, LAMBDA0)
    return ST.analyze(w)


def test_kawahara_ground_state_is_stable(kawahara_report):
    r = kawahara_report
    assert r.n_lplus == 1
    assert r.vk_index < 0
    assert r.verdict is ST.Verdict.Stable
    assert r.max_real_part < r.stab_tol
    assert r.n_lminus is None and r.k_i_minus is None


def test_kawahara_spectrum_pairing(kawahara_report):
    mu = kawahara_report.eigenvalues
    assert kawahara_report.extra["pairing_defect"] < 1e-6
    assert abs(np.sum(mu).real) < 1e-8 * kawahara_report.spectral_radius


def test_kawahara_report_serializes(kawahara_report):
    d = json.loads(json.dumps(kawahara_report.to_dict()))
    assert d["verdict"] == "Stable"
    assert d["n_lplus"] == 1


def test_zero_potential_operator_matches_symbol():
    g = SpectralGrid(1, 64, 20.0)
    model = M.Kawahara(1.0, 2.0)
    omega = 0.7
    A = LO.multiplier_matrix(g, M.symbol(model, g) + omega)
    mu = ST.kawahara_operator_eigenvalues(g, A)
    (k,) = g.wavenumbers
    k = np.where(g.nyquist_mask(0), 0.0, k)
    expected = np.sort(k * (M.symbol(model, g) + omega))
    assert np.max(np.abs(mu.real)) < 1e-8 * ST.kawahara_radius(model, g, omega)
    assert np.allclose(np.sort(mu.imag), expected, atol=1e-8 * ST.kawahara_radius(model, g, omega))


def test_kawahara_spectrum_rejects_nls(small_soliton_wave):
    with pytest.raises(ValueError):
        ST.kawahara_spectrum(small_soliton_wave)


def test_classify_eigenvalues():
    mu = np.array([2.0, -2.0, 1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j, 3j, -3j, 0.0])
    assert ST.classify_eigenvalues(mu, 1e-9) == (1, 1, 2.0)
    assert ST.pairing_defect(mu) == 0.0


def test_compare_spectra():
    a = np.array([1.0, 2.0 + 1j, -3.0, 1e-9])
    b = np.array([-3.0, 1.0 + 1e-7, 2.0 + 1j])
    assert ST.compare_spectra(a, b, 1e-3) == pytest.approx(1e-7)
    with pytest.raises(ValueError):
        ST.compare_spectra(a, b[:2], 1e-3)


def test_identity_pair_gives_imaginary_pair():
    I = np.eye(4)
    mu = ST.mu_from_nu(ST.nls_product_eigenvalues(I, I))
    assert np.allclose(np.sort(mu.imag), [-1] * 4 + [1] * 4)
    assert np.allclose(mu.real, 0)
    block = ST.nls_block_eigenvalues(I, I)
    assert ST.compare_spectra(mu, block, 1e-6) < 1e-12


@pytest.fixture(scope="module")
def nls_report(small_soliton_wave):
    return ST.nls_spectrum(small_soliton_wave, cross_check=True)


def test_nls_soliton_stable(nls_report):
    r = nls_report
    assert r.verdict is ST.Verdict.Stable
    assert r.n_lplus == 1 and r.n_lminus == 0
    assert r.n_d == 1
    assert r.k_r == 0 and r.k_c == 0
    assert r.k_i_minus == 0
    assert r.extra["identity_balances"]


def test_nls_cross_check(nls_report):
    assert nls_report.extra["cross_check_rel"] < 1e-6


def test_d_matrix_structure(nls_report):
    D = nls_report.d_matrix
    assert D.shape == (2, 2)
    assert D[0, 0] == pytest.approx(nls_report.vk_index, rel=1e-12)
    assert D[1, 1] > 0
    assert abs(D[0, 1]) < 1e-8 * abs(D).max()


class _StubGrid:
    """Just enough grid for index_count: fixed size and a prescribed gradient."""

    def __init__(self, n, dphi):
        self.size = n
        self._dphi = dphi

    def gradient(self, f):
        return [self._dphi]


class _StubWave:
    def __init__(self, model, grid, field):
        self.model, self.grid, self.field = model, grid, field


def test_d_matrix_synthetic_diagonal_oracle():
    # L+ = diag(-1, 0, 4, ...), L- = diag(0, 2, 3, ...); phi along e0, dphi along e1
    grid = SpectralGrid(1, 64, 10.0)
    model = M.MixedNLS(-1, 1.0, 3.0)
    phi = np.zeros(64)
    phi[0] = 2.0
    dphi = np.zeros(64)
    dphi[1] = 3.0
    lplus = np.diag(np.r_[-1.0, 0.0, np.full(62, 4.0)])
    lminus = np.diag(np.r_[0.0, 2.0, np.full(62, 3.0)])
    pair = LO.LinearizedPair(lplus, lminus, grid, model, 0.0)
    D, n_d, rep = ST.index_count(_StubWave(model, _StubGrid(64, dphi), phi), pair)
    h = grid.h
    assert D[0, 0] == pytest.approx(h * 4.0 / -1.0)
    assert D[1, 1] == pytest.approx(h * 9.0 / 2.0)
    assert D[0, 1] == 0.0
    assert n_d == 1
    assert rep["n_L"] == 1 and rep["rhs"] == 0


def test_essential_edge():
    assert ST.essential_edge(M.Kawahara(2.0, 3.0), 1.5) == pytest.approx(0.5)
    assert ST.essential_edge(M.Kawahara(-2.0, 3.0), 1.5) == pytest.approx(1.5)


def test_verdict_combinations():
    assert ST._verdict(True, True) is ST.Verdict.Stable
    assert ST._verdict(False, False) is ST.Verdict.Unstable
    assert ST._verdict(True, False) is ST.Verdict.Inconclusive
