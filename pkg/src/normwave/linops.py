"""Dense linearized operators about a wave and their spectral data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import models as M
from .grid import SpectralGrid

MAX_DENSE_ROWS = 4096


class AmbiguousKernel(RuntimeError):
    """An eigenvalue sits just above the zero tolerance; the kernel cannot be told apart."""


class EigensolverError(RuntimeError):
    pass


def multiplier_matrix(grid: SpectralGrid, sym: np.ndarray) -> np.ndarray:
    """Dense matrix of the Fourier multiplier ``sym`` acting on grid samples."""
    n = grid.size
    if n > MAX_DENSE_ROWS:
        raise MemoryError(f"dense operator with {n} rows exceeds the {MAX_DENSE_ROWS}-row guard")
    out = np.empty((n, n))
    axes = tuple(range(1, grid.dim + 1))
    chunk = 512
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        basis = np.zeros((stop - start,) + grid.shape)
        flat = basis.reshape(stop - start, n)
        flat[np.arange(stop - start), np.arange(start, stop)] = 1.0
        cols = np.fft.ifftn(sym * np.fft.fftn(basis, axes=axes), axes=axes)
        out[:, start:stop] = cols.real.reshape(stop - start, n).T
    return out


def derivative_matrix(grid: SpectralGrid, axis: int = 0) -> np.ndarray:
    order = tuple(int(a == axis) for a in range(grid.dim))
    sym = grid.derivative_symbol(order)
    n = grid.size
    if n > MAX_DENSE_ROWS:
        raise MemoryError(f"dense operator with {n} rows exceeds the {MAX_DENSE_ROWS}-row guard")
    axes = tuple(range(1, grid.dim + 1))
    basis = np.eye(n).reshape((n,) + grid.shape)
    cols = np.fft.ifftn(sym * np.fft.fftn(basis, axes=axes), axes=axes).real
    return cols.reshape(n, n).T


def _sym(A):
    return 0.5 * (A + A.T)


@dataclass
class LinearizedPair:
    """``L+ = Lambda + omega - p|phi|^{p-1}`` and, for NLS models, ``L- = Lambda + omega - |phi|^{p-1}``."""

    lplus: np.ndarray
    lminus: np.ndarray | None
    grid: SpectralGrid
    model: object
    omega: float

    @property
    def weight(self) -> float:
        return self.grid.quad_weight


def assemble(model, wave) -> LinearizedPair:
    grid = wave.grid
    base = multiplier_matrix(grid, M.symbol(model, grid)) + wave.omega * np.eye(grid.size)
    pot = M.potential_power(model, wave.field).ravel()
    lplus = _sym(base - model.p * np.diag(pot))
    lminus = _sym(base - np.diag(pot)) if M.is_nls(model) else None
    return LinearizedPair(lplus=lplus, lminus=lminus, grid=grid, model=model, omega=wave.omega)


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    negative_count: int
    near_zero: list
    zero_tol: float

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))


def symmetric_spectrum(matrix: np.ndarray, zero_tol: float | None = None, rel_zero_tol: float = 1e-8) -> SpectralReport:
    """Full dense eigendecomposition of a symmetric matrix.

    Without an explicit ``zero_tol`` the tolerance is ``rel_zero_tol`` times
    the spectral radius.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(np.abs(A).max(), 1e-300)
    if np.abs(A - A.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    try:
        mu, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(str(exc)) from exc
    if zero_tol is None:
        zero_tol = rel_zero_tol * float(np.max(np.abs(mu)))
    near = [(float(m), V[:, i]) for i, m in enumerate(mu) if abs(m) < zero_tol]
    return SpectralReport(eigenvalues=mu, eigenvectors=V, negative_count=int(np.sum(mu < -zero_tol)),
                          near_zero=near, zero_tol=float(zero_tol))


@dataclass
class InverseForm:
    value: float
    projection_defect: float
    kernel_dim: int
    deflated: list


def inverse_form(report: SpectralReport, u: np.ndarray, v: np.ndarray | None = None,
                 weight: float = 1.0, candidates=()) -> InverseForm:
    """``<A^{-1} P u, P v>`` with ``P`` projecting off the (numerical) kernel of ``A``.

    ``candidates`` are vectors known to lie in the kernel analytically; the
    eigenvectors best aligned with them are deflated even if their eigenvalue
    drifts above the tolerance.
    """
    mu, V = report.eigenvalues, report.eigenvectors
    u = np.ravel(u)
    v = u if v is None else np.ravel(v)
    kernel = np.abs(mu) < report.zero_tol
    for c in candidates:
        c = np.ravel(c)
        nc = np.linalg.norm(c)
        if nc == 0:
            continue
        overlap = np.abs(V.T @ (c / nc))
        kernel[int(np.argmax(overlap))] = True
    suspicious = (~kernel) & (np.abs(mu) < 10 * report.zero_tol)
    if np.any(suspicious):
        raise AmbiguousKernel(f"eigenvalues {mu[suspicious]} lie within 10x of zero_tol={report.zero_tol:.3e}")
    cu, cv = V.T @ u, V.T @ v
    defect = float(np.linalg.norm(cu[kernel]) / max(np.linalg.norm(u), 1e-300))
    value = weight * float(np.sum(cu[~kernel] * cv[~kernel] / mu[~kernel]))
    return InverseForm(value=value, projection_defect=defect, kernel_dim=int(kernel.sum()),
                       deflated=[float(m) for m in mu[kernel]])


def translation_modes(wave) -> list:
    return [d.ravel() for d in wave.grid.gradient(wave.field)]


def vk_analysis(pair: LinearizedPair, wave, zero_tol: float | None = None,
                report: SpectralReport | None = None) -> InverseForm:
    report = report or symmetric_spectrum(pair.lplus, zero_tol)
    if report.negative_count != 1:
        raise ValueError(f"vk index needs exactly one negative eigenvalue of L+, found {report.negative_count}")
    return inverse_form(report, wave.field, weight=pair.weight, candidates=translation_modes(wave))


def vk_index(pair: LinearizedPair, wave, zero_tol: float | None = None,
             report: SpectralReport | None = None) -> float:
    """``<L+^{-1} phi, phi>`` with kernel deflation."""
    return vk_analysis(pair, wave, zero_tol, report).value
