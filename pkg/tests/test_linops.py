import numpy as np
import pytest

from normwave import linops as LO
from normwave import models as M
from normwave.grid import SpectralGrid


def test_multiplier_matrix_matches_fft_action():
    g = SpectralGrid(2, 64, 20.0)
    sym = M.symbol(M.LaplacianNLS(1.0, 3.0, dim=2), g)
    A = LO.multiplier_matrix(g, sym)
    f = np.random.default_rng(0).standard_normal(g.shape)
    assert np.allclose(A @ f.ravel(), g.apply_symbol(sym, f).ravel(), atol=1e-10)


def test_derivative_matrix_matches_spectral_derivative():
    g = SpectralGrid(1, 64, 12.0)
    D = LO.derivative_matrix(g)
    f = np.exp(-g.x1**2)
    assert np.allclose(D @ f, g.derivative(f, (1,)), atol=1e-12)
    assert np.allclose(D, -D.T, atol=1e-12)


def test_memory_guard():
    g = SpectralGrid(2, 128, 10.0)
    with pytest.raises(MemoryError):
        LO.multiplier_matrix(g, np.ones(g.shape))
    with pytest.raises(MemoryError):
        LO.derivative_matrix(g)


def test_pair_is_symmetric(small_soliton_pair):
    assert np.array_equal(small_soliton_pair.lplus, small_soliton_pair.lplus.T)
    assert np.array_equal(small_soliton_pair.lminus, small_soliton_pair.lminus.T)


def test_kawahara_pair_has_no_lminus(kawahara_wave):
    pair = LO.assemble(kawahara_wave.model, kawahara_wave)
    assert pair.lminus is None


def test_lminus_annihilates_profile(small_soliton_wave, small_soliton_pair):
    phi = small_soliton_wave.field
    assert np.max(np.abs(small_soliton_pair.lminus @ phi)) < 1e-7


def test_lplus_annihilates_derivative(small_soliton_wave, small_soliton_pair):
    dphi = small_soliton_wave.grid.derivative(small_soliton_wave.field, (1,))
    assert np.max(np.abs(small_soliton_pair.lplus @ dphi)) < 1e-6


def test_lplus_quadratic_form_on_profile(small_soliton_wave, small_soliton_pair):
    g, phi = small_soliton_wave.grid, small_soliton_wave.field
    lhs = g.inner(small_soliton_pair.lplus @ phi, phi)
    p = small_soliton_wave.model.p
    assert lhs == pytest.approx(-(p - 1) * small_soliton_wave.lp_p1, rel=1e-8)


def test_lplus_below_lminus(small_soliton_wave, small_soliton_pair):
    rng = np.random.default_rng(5)
    for _ in range(5):
        v = rng.standard_normal(small_soliton_wave.grid.size)
        assert v @ small_soliton_pair.lplus @ v < v @ small_soliton_pair.lminus @ v


def test_identity_spectrum():
    rep = LO.symmetric_spectrum(np.eye(7))
    assert np.allclose(rep.eigenvalues, 1.0)
    assert rep.negative_count == 0
    assert rep.near_zero == []
    assert rep.spectral_radius == 1.0


def test_symmetric_spectrum_rejects_bad_input():
    with pytest.raises(ValueError):
        LO.symmetric_spectrum(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        LO.symmetric_spectrum(np.ones((2, 3)))


def test_eigenpairs_residual(small_soliton_pair):
    rep = LO.symmetric_spectrum(small_soliton_pair.lplus)
    A, V, mu = small_soliton_pair.lplus, rep.eigenvectors, rep.eigenvalues
    assert np.max(np.abs(A @ V - V * mu)) < 1e-10 * rep.spectral_radius


def test_soliton_counts(small_soliton_pair):
    plus = LO.symmetric_spectrum(small_soliton_pair.lplus)
    minus = LO.symmetric_spectrum(small_soliton_pair.lminus)
    assert plus.negative_count == 1
    assert len(plus.near_zero) == 1
    assert minus.negative_count == 0
    assert len(minus.near_zero) == 1


def test_inverse_form_diagonal():
    rep = LO.symmetric_spectrum(np.diag([-1.0, 2.0, 3.0]))
    assert LO.inverse_form(rep, np.array([1.0, 0.0, 0.0])).value == pytest.approx(-1.0)
    rep = LO.symmetric_spectrum(np.diag([-2.0, 1.0]))
    for a, b in [(1.0, 1.0), (2.0, 0.5), (0.3, -4.0)]:
        got = LO.inverse_form(rep, np.array([a, b])).value
        assert got == pytest.approx(-a * a / 2 + b * b)


def test_inverse_form_deflates_kernel():
    rep = LO.symmetric_spectrum(np.diag([-1.0, 0.0, 2.0]))
    out = LO.inverse_form(rep, np.array([1.0, 5.0, 2.0]))
    assert out.kernel_dim == 1
    assert out.value == pytest.approx(-1.0 + 2.0)
    assert out.projection_defect == pytest.approx(5.0 / np.sqrt(30.0))


def test_inverse_form_candidate_deflation():
    rep = LO.symmetric_spectrum(np.diag([-1.0, 1e-3, 2.0]), zero_tol=1e-6)
    out = LO.inverse_form(rep, np.array([1.0, 1.0, 0.0]), candidates=[np.array([0.0, 1.0, 0.0])])
    assert out.kernel_dim == 1
    assert out.value == pytest.approx(-1.0)


def test_inverse_form_ambiguous_kernel():
    rep = LO.symmetric_spectrum(np.diag([-1.0, 5e-6, 2.0]), zero_tol=1e-6)
    with pytest.raises(LO.AmbiguousKernel):
        LO.inverse_form(rep, np.array([1.0, 1.0, 1.0]))


def test_vk_soliton(small_soliton_wave, small_soliton_pair):
    out = LO.vk_analysis(small_soliton_pair, small_soliton_wave)
    assert out.value < 0
    assert out.projection_defect < 1e-6
    assert out.kernel_dim == 1


def test_vk_invariant_under_translation(small_soliton_wave, soliton_model):
    w = small_soliton_wave
    base = LO.vk_index(LO.assemble(soliton_model, w), w)
    moved = M.Wave.from_field(soliton_model, w.grid, np.roll(w.field, 40), omega=w.omega)
    shifted = LO.vk_index(LO.assemble(soliton_model, moved), moved)
    assert shifted == pytest.approx(base, rel=1e-10)


def test_vk_requires_single_negative_direction():
    g = SpectralGrid(1, 64, 10.0)
    model = M.Kawahara(1.0, 2.0)
    w = M.Wave.from_field(model, g, np.exp(-g.x1**2), omega=5.0)
    pair = LO.assemble(model, w)
    pair.lplus = np.eye(g.size)
    with pytest.raises(ValueError):
        LO.vk_index(pair, w)
