"""Linearized spectra, index counting and stability verdicts."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import linops
from . import models as M


class Verdict(enum.Enum):
    Stable = "Stable"
    Unstable = "Unstable"
    Inconclusive = "Inconclusive"


REL_STAB_TOL = 1e-6


@dataclass
class StabilityReport:
    model_tag: str
    n_lplus: int
    n_lminus: int | None
    vk_index: float | None
    d_matrix: np.ndarray | None
    n_d: int | None
    k_r: int
    k_c: int
    max_real_part: float
    verdict: Verdict
    stab_tol: float = 0.0
    spectral_radius: float = 0.0
    criterion_passed: bool = False
    essential_edge: float = 0.0
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    eigenvalues: np.ndarray | None = field(default=None, repr=False)

    @property
    def k_i_minus(self):
        """Remainder balancing ``k_r + 2k_c + 2k_i = n(L) - n(D)``; ``None`` when not applicable."""
        return self.extra.get("k_i_minus")

    def to_dict(self) -> dict:
        out = {
            "model": self.model_tag,
            "n_lplus": self.n_lplus,
            "n_lminus": self.n_lminus,
            "vk_index": self.vk_index,
            "d_matrix": None if self.d_matrix is None else np.asarray(self.d_matrix).tolist(),
            "n_d": self.n_d,
            "k_r": self.k_r,
            "k_c": self.k_c,
            "max_real_part": self.max_real_part,
            "stab_tol": self.stab_tol,
            "spectral_radius": self.spectral_radius,
            "criterion_passed": self.criterion_passed,
            "essential_edge": self.essential_edge,
            "verdict": self.verdict.value,
            "notes": list(self.notes),
        }
        out.update({k: v for k, v in self.extra.items() if np.isscalar(v) or v is None})
        return out


def essential_edge(model, omega: float) -> float:
    """Bottom of the continuous spectrum of ``L+`` on the line: ``omega + inf Lambda``."""
    return omega + M.symbol_floor(model)


def _verdict(direct_stable: bool, criterion: bool) -> Verdict:
    if direct_stable and criterion:
        return Verdict.Stable
    if not direct_stable and not criterion:
        return Verdict.Unstable
    return Verdict.Inconclusive


def classify_eigenvalues(mu: np.ndarray, tol: float) -> tuple:
    """``(k_r, k_c, max_real_part)`` for a spectrum closed under ``mu -> -conj(mu)``."""
    mu = np.asarray(mu, dtype=complex)
    right = mu.real > tol
    k_r = int(np.sum(right & (np.abs(mu.imag) < tol)))
    k_c = int(np.sum(right & (mu.imag >= tol)))
    return k_r, k_c, float(mu.real.max()) if mu.size else 0.0


def pairing_defect(mu: np.ndarray) -> float:
    """Largest distance from ``-conj(mu)`` to the spectrum, over all ``mu``."""
    mu = np.asarray(mu, dtype=complex)
    target = -np.conj(mu)
    dist = np.abs(target[:, None] - mu[None, :]).min(axis=1)
    return float(dist.max())


def kawahara_operator_eigenvalues(grid, lplus: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``D_x @ lplus`` with ``D_x`` the Fourier derivative matrix."""
    Dx = linops.derivative_matrix(grid, 0)
    try:
        return np.linalg.eigvals(Dx @ lplus)
    except np.linalg.LinAlgError as exc:
        raise linops.EigensolverError(str(exc)) from exc


def kawahara_radius(model, grid, omega: float) -> float:
    """Spectral radius estimate of ``d_x L+`` from the constant-coefficient symbol."""
    (k,) = grid.wavenumbers
    k = np.where(grid.nyquist_mask(0), 0.0, k)
    return float(np.max(np.abs(k * (M.symbol(model, grid) + omega))))


def kawahara_spectrum(wave, pair: linops.LinearizedPair | None = None,
                      zero_tol: float | None = None) -> StabilityReport:
    model = wave.model
    if model.family != "Kawahara":
        raise ValueError("kawahara_spectrum needs a Kawahara wave")
    pair = pair or linops.assemble(model, wave)
    grid = wave.grid
    plus = linops.symmetric_spectrum(pair.lplus, zero_tol)
    notes = []
    vk = None
    defect = None
    if plus.negative_count == 1:
        form = linops.vk_analysis(pair, wave, report=plus)
        vk, defect = form.value, form.projection_defect
    else:
        notes.append(f"n(L+)={plus.negative_count}; vk index not evaluated")
    criterion = plus.negative_count == 1 and vk is not None and vk < 0

    mu = kawahara_operator_eigenvalues(grid, pair.lplus)
    rho = kawahara_radius(model, grid, wave.omega)
    tol = REL_STAB_TOL * rho
    k_r, k_c, max_re = classify_eigenvalues(mu, tol)
    direct = max_re < tol
    edge = essential_edge(model, wave.omega)
    below = int(np.sum(plus.eigenvalues < edge - plus.zero_tol))
    notes.append(f"essential spectrum of L+ starts at {edge:.6g}; {below} eigenvalues lie below it")
    return StabilityReport(
        model_tag=model.tag(), n_lplus=plus.negative_count, n_lminus=None, vk_index=vk,
        d_matrix=None, n_d=None, k_r=k_r, k_c=k_c, max_real_part=max_re,
        verdict=_verdict(direct, criterion), stab_tol=tol, spectral_radius=rho,
        criterion_passed=criterion, essential_edge=edge, notes=notes,
        extra={"projection_defect": defect, "pairing_defect": pairing_defect(mu) / rho,
               "zero_tol": plus.zero_tol},
        eigenvalues=mu)


def nls_product_eigenvalues(lplus: np.ndarray, lminus: np.ndarray) -> np.ndarray:
    """Eigenvalues ``nu`` of ``L- L+``; the linearized spectrum is ``+-sqrt(-nu)``."""
    try:
        return np.linalg.eigvals(lminus @ lplus)
    except np.linalg.LinAlgError as exc:
        raise linops.EigensolverError(str(exc)) from exc


def nls_block_eigenvalues(lplus: np.ndarray, lminus: np.ndarray) -> np.ndarray:
    n = lplus.shape[0]
    Z = np.zeros((n, n))
    try:
        return np.linalg.eigvals(np.block([[Z, -lminus], [lplus, Z]]))
    except np.linalg.LinAlgError as exc:
        raise linops.EigensolverError(str(exc)) from exc


def mu_from_nu(nu: np.ndarray) -> np.ndarray:
    root = np.sqrt(-np.asarray(nu, dtype=complex))
    return np.concatenate([root, -root])


def compare_spectra(mu_a: np.ndarray, mu_b: np.ndarray, floor: float) -> float:
    """Worst relative mismatch between two spectra after optimal matching.

    Eigenvalues below ``floor`` in modulus (the kernel cluster) are excluded.
    """
    a = np.asarray(mu_a, dtype=complex)
    b = np.asarray(mu_b, dtype=complex)
    a = a[np.abs(a) >= floor]
    b = b[np.abs(b) >= floor]
    if a.size != b.size:
        raise ValueError(f"nonzero spectra differ in size ({a.size} vs {b.size})")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols] / np.abs(a[rows])))


def nls_radius(model, grid, omega: float) -> float:
    """Spectral radius estimate of ``J L`` from the constant-coefficient symbol."""
    return float(np.max(np.abs(M.symbol(model, grid) + omega)))


def index_count(wave, pair: linops.LinearizedPair | None = None,
                plus: linops.SpectralReport | None = None,
                minus: linops.SpectralReport | None = None) -> tuple:
    """Build the D-matrix from the phase and translation generators.

    Returns ``(D, n_D, report)``; ``report`` holds ``n_L`` and whether the
    count identity is applicable (``det D != 0``).
    """
    model = wave.model
    if not M.is_nls(model):
        raise ValueError("index_count needs an NLS wave")
    pair = pair or linops.assemble(model, wave)
    plus = plus or linops.symmetric_spectrum(pair.lplus)
    minus = minus or linops.symmetric_spectrum(pair.lminus)
    n = wave.grid.size
    phi = wave.field.ravel()
    grads = linops.translation_modes(wave)
    zero = np.zeros(n)
    # J^{-1} applied to the kernel generators (0, phi) and (d_j phi, 0)
    gens = [(phi, zero)] + [(zero, -g) for g in grads]
    w = pair.weight
    k = len(gens)
    D = np.zeros((k, k))
    for i, (ui, vi) in enumerate(gens):
        for j, (uj, vj) in enumerate(gens):
            total = 0.0
            if np.any(ui) and np.any(uj):
                total += linops.inverse_form(plus, ui, uj, weight=w, candidates=grads).value
            if np.any(vi) and np.any(vj):
                total += linops.inverse_form(minus, vi, vj, weight=w, candidates=[phi]).value
            D[i, j] = total
    D = 0.5 * (D + D.T)
    eig = np.linalg.eigvalsh(D)
    n_d = int(np.sum(eig < 0))
    offdiag = float(np.max(np.abs(D - np.diag(np.diag(D))))) if k > 1 else 0.0
    applicable = bool(np.min(np.abs(eig)) > 1e-10 * np.max(np.abs(eig)))
    report = {
        "n_L": plus.negative_count + minus.negative_count,
        "n_D": n_d,
        "applicable": applicable,
        "offdiag_max": offdiag,
        "rhs": plus.negative_count + minus.negative_count - n_d,
    }
    return D, n_d, report


def nls_spectrum(wave, pair: linops.LinearizedPair | None = None, cross_check: bool = False,
                 zero_tol: float | None = None) -> StabilityReport:
    model = wave.model
    if not M.is_nls(model):
        raise ValueError("nls_spectrum needs an NLS wave")
    pair = pair or linops.assemble(model, wave)
    grid = wave.grid
    plus = linops.symmetric_spectrum(pair.lplus, zero_tol)
    minus = linops.symmetric_spectrum(pair.lminus, plus.zero_tol)
    notes = []
    phi = wave.field.ravel()
    kernel_ok = False
    if minus.negative_count == 0 and len(minus.near_zero) == 1:
        vec = minus.near_zero[0][1]
        kernel_ok = abs(vec @ phi) / np.linalg.norm(phi) > 1 - 1e-6
    if not kernel_ok:
        notes.append(f"L- has {minus.negative_count} negative and {len(minus.near_zero)} near-zero eigenvalues")
    vk = defect = None
    if plus.negative_count == 1:
        form = linops.vk_analysis(pair, wave, report=plus)
        vk, defect = form.value, form.projection_defect
    criterion = plus.negative_count == 1 and kernel_ok and vk is not None and vk < 0

    nu = nls_product_eigenvalues(pair.lplus, pair.lminus)
    rho_nu = nls_radius(model, grid, wave.omega) ** 2
    mu = mu_from_nu(nu)
    rho = np.sqrt(rho_nu)
    tol = REL_STAB_TOL * rho
    k_r, k_c, max_re = classify_eigenvalues(mu, tol)
    # real-nonnegative test on nu, with the kernel cluster excluded
    big = np.abs(nu) > REL_STAB_TOL * rho_nu
    nu_ok = bool(np.all(np.abs(nu.imag[big]) < REL_STAB_TOL * np.abs(nu[big]))
                 and np.all(nu.real > -REL_STAB_TOL * rho_nu))
    direct = nu_ok and max_re < tol

    D, n_d, ident = index_count(wave, pair, plus, minus)
    extra = {"projection_defect": defect, "zero_tol": plus.zero_tol,
             "n_L": ident["n_L"], "identity_applicable": ident["applicable"],
             "d_offdiag_max": ident["offdiag_max"], "k_i_minus": None}
    if ident["applicable"]:
        twice = ident["rhs"] - k_r - 2 * k_c
        extra["k_i_minus"] = twice / 2
        extra["identity_balances"] = twice >= 0 and twice % 2 == 0
    else:
        notes.append("det(D) vanishes; count identity not applicable")
    if cross_check:
        block = nls_block_eigenvalues(pair.lplus, pair.lminus)
        floor = 1e-2 * min(1.0, abs(essential_edge(model, wave.omega)))
        extra["cross_check_rel"] = compare_spectra(mu, block, floor)
    edge = essential_edge(model, wave.omega)
    notes.append(f"essential spectrum of L+- starts at {edge:.6g}")
    return StabilityReport(
        model_tag=model.tag(), n_lplus=plus.negative_count, n_lminus=minus.negative_count,
        vk_index=vk, d_matrix=D, n_d=n_d, k_r=k_r, k_c=k_c, max_real_part=max_re,
        verdict=_verdict(direct, criterion), stab_tol=tol, spectral_radius=float(rho),
        criterion_passed=criterion, essential_edge=edge, notes=notes, extra=extra,
        eigenvalues=mu)


def analyze(wave, cross_check: bool = False) -> StabilityReport:
    pair = linops.assemble(wave.model, wave)
    if M.is_nls(wave.model):
        return nls_spectrum(wave, pair, cross_check=cross_check)
    return kawahara_spectrum(wave, pair)
