"""Model families, energies and Euler-Lagrange residuals.

Every model has a real even linear symbol of the form

    Lambda(k) = |k|^4 - beta(k)

where ``beta`` is the second-order part (``b k^2`` for Kawahara,
``eps |b|^2 k_1^2`` for the mixed-derivative NLS, ``b |k|^2`` for the
pure-Laplacian NLS), and the nonlinearity ``|u|^{p-1} u``.
"""
from __future__ import annotations

import enum
import dataclasses
from dataclasses import dataclass
from typing import Union

import numpy as np

from .grid import SpectralGrid


class Regime(enum.Enum):
    WellPosedAllLambda = "WellPosedAllLambda"
    LargeLambdaOnly = "LargeLambdaOnly"
    EnergyUnboundedBelow = "EnergyUnboundedBelow"
    # Reserved label for reports flagging a p sitting exactly on a threshold;
    # validity_regime itself resolves boundaries to one of the other three.
    Critical = "Critical"


class SolverKind(enum.Enum):
    GradientFlow = "GradientFlow"
    Petviashvili = "Petviashvili"
    Imported = "Imported"


def _check_p(p):
    if not p > 1:
        raise ValueError(f"nonlinearity power must exceed 1, got {p}")


@dataclass(frozen=True)
class Kawahara:
    b: float
    p: float
    dim: int = dataclasses.field(default=1, init=False)
    family = "Kawahara"

    def __post_init__(self):
        _check_p(self.p)

    @property
    def second_order_coefficient(self) -> float:
        return float(self.b)

    def second_order_symbol(self, grid: SpectralGrid) -> np.ndarray:
        (k,) = grid.wavenumbers
        return self.b * k * k

    def thresholds(self) -> tuple:
        return 5.0, 9.0

    def tag(self) -> str:
        return f"Kawahara(b={self.b:g},p={self.p:g})"


@dataclass(frozen=True)
class MixedNLS:
    epsilon: int
    bmag: float
    p: float
    dim: int = 1
    family = "MixedNLS"

    def __post_init__(self):
        _check_p(self.p)
        if self.epsilon not in (1, -1):
            raise ValueError("epsilon must be +1 or -1")
        if self.bmag < 0:
            raise ValueError("bmag must be non-negative")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")

    @property
    def second_order_coefficient(self) -> float:
        return float(self.epsilon * self.bmag ** 2)

    def second_order_symbol(self, grid: SpectralGrid) -> np.ndarray:
        k1 = grid.wavenumbers[0]
        return self.second_order_coefficient * k1 * k1

    def thresholds(self) -> tuple:
        return 1 + 8 / (self.dim + 1), 1 + 8 / self.dim

    def tag(self) -> str:
        return f"MixedNLS(eps={self.epsilon:+d},b={self.bmag:g},p={self.p:g},d={self.dim})"


@dataclass(frozen=True)
class LaplacianNLS:
    b: float
    p: float
    dim: int = 1
    family = "LaplacianNLS"

    def __post_init__(self):
        _check_p(self.p)
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")

    @property
    def second_order_coefficient(self) -> float:
        return float(self.b)

    def second_order_symbol(self, grid: SpectralGrid) -> np.ndarray:
        return self.b * grid.k_squared

    def thresholds(self) -> tuple:
        return 1 + 4 / self.dim, 1 + 8 / self.dim

    def tag(self) -> str:
        return f"LaplacianNLS(b={self.b:g},p={self.p:g},d={self.dim})"


ModelSpec = Union[Kawahara, MixedNLS, LaplacianNLS]


def is_nls(model) -> bool:
    return model.family != "Kawahara"


def _compatible(model, grid: SpectralGrid):
    if model.dim != grid.dim:
        raise ValueError(f"{model.tag()} needs a {model.dim}-D grid, got dim={grid.dim}")


def symbol(model, grid: SpectralGrid) -> np.ndarray:
    _compatible(model, grid)
    return grid.k_squared ** 2 - model.second_order_symbol(grid)


def symbol_floor(model) -> float:
    """Infimum of the symbol over all real wavenumbers."""
    c = model.second_order_coefficient
    return -c * c / 4.0 if c > 0 else 0.0


def omega_lower_bound(model) -> float:
    """Essential-spectrum edge: the multiplier must exceed this value."""
    return -symbol_floor(model)


def nonlinearity(model, grid: SpectralGrid, f: np.ndarray) -> np.ndarray:
    """``|f|^{p-1} f`` evaluated pointwise (2/3-filtered if the grid asks)."""
    out = np.sign(f) * np.abs(f) ** model.p
    if grid.dealias:
        out = grid.ifft(grid.fft(out) * grid.dealias_mask())
    return out


def potential_power(model, f: np.ndarray) -> np.ndarray:
    return np.abs(f) ** (model.p - 1)


def quadratic_part(model, grid: SpectralGrid, f: np.ndarray) -> float:
    """``<Lambda f, f>``."""
    return grid.quadratic_form(symbol(model, grid), f)


def energy(model, grid: SpectralGrid, f: np.ndarray) -> float:
    f = grid.check(f)
    p = model.p
    value = 0.5 * quadratic_part(model, grid, f) - grid.lp_norm(f, p + 1) ** (p + 1) / (p + 1)
    if not np.isfinite(value):
        raise FloatingPointError("energy is not finite")
    return value


def energy_gradient(model, grid: SpectralGrid, f: np.ndarray) -> np.ndarray:
    """Unconstrained L2 gradient ``Lambda f - |f|^{p-1} f``."""
    f = grid.check(f)
    g = grid.apply_symbol(symbol(model, grid), f) - nonlinearity(model, grid, f)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("energy gradient is not finite")
    return g


def el_residual_field(model, grid: SpectralGrid, f: np.ndarray, omega: float) -> np.ndarray:
    if not np.isfinite(omega):
        raise ValueError("omega must be finite")
    return energy_gradient(model, grid, f) + omega * grid.check(f)


def el_residual(model, grid: SpectralGrid, f: np.ndarray, omega: float) -> tuple:
    """Sup and L2 norms of ``Lambda f + omega f - |f|^{p-1} f``."""
    r = el_residual_field(model, grid, f, omega)
    return float(np.max(np.abs(r))), float(np.sqrt(grid.mass(r)))


def omega_from_field(model, grid: SpectralGrid, f: np.ndarray) -> float:
    """Multiplier making the residual L2-orthogonal to ``f``."""
    f = grid.check(f)
    lam = grid.mass(f)
    if lam == 0.0:
        raise ValueError("omega is undefined for the zero field")
    return (grid.inner(nonlinearity(model, grid, f), f) - quadratic_part(model, grid, f)) / lam


def validity_regime(model, lam: float | None = None) -> Regime:
    """Classify the constrained minimization by the nonlinearity power.

    ``lam`` is accepted for interface symmetry; the large-mass thresholds are
    not known in closed form, so the answer depends on ``p`` and ``dim`` only.
    """
    lower, upper = model.thresholds()
    p = model.p
    if p >= upper:
        return Regime.EnergyUnboundedBelow
    if p >= lower:
        return Regime.LargeLambdaOnly
    return Regime.WellPosedAllLambda


def at_threshold(model, rtol: float = 1e-12) -> bool:
    return any(abs(model.p - t) <= rtol * t for t in model.thresholds())


def second_order_energy(model, grid: SpectralGrid, f: np.ndarray) -> float:
    """``<beta f, f>``, e.g. ``b ||f'||^2`` or ``eps |b|^2 ||d_1 f||^2``."""
    return grid.quadratic_form(model.second_order_symbol(grid), f)


def bilaplacian_energy(grid: SpectralGrid, f: np.ndarray) -> float:
    """``||Delta f||^2``."""
    return grid.quadratic_form(grid.k_squared ** 2, f)


@dataclass
class Wave:
    """A profile together with the quantities derived from it."""

    model: object
    grid: SpectralGrid
    field: np.ndarray
    lam: float
    omega: float
    energy: float
    el_residual_sup: float
    el_residual_l2: float
    solver: SolverKind = SolverKind.Imported
    iterations: int = 0
    info: dict = dataclasses.field(default_factory=dict)

    @classmethod
    def from_field(cls, model, grid, f, solver=SolverKind.Imported, omega=None,
                   iterations=0, info=None) -> "Wave":
        f = grid.check(f).copy()
        if omega is None:
            omega = omega_from_field(model, grid, f)
        sup, l2 = el_residual(model, grid, f, omega)
        return cls(model=model, grid=grid, field=f, lam=grid.mass(f), omega=float(omega),
                   energy=energy(model, grid, f), el_residual_sup=sup, el_residual_l2=l2,
                   solver=solver, iterations=iterations, info=dict(info or {}))

    @property
    def lp_p1(self) -> float:
        """``||phi||_{p+1}^{p+1}``."""
        return self.grid.lp_norm(self.field, self.model.p + 1) ** (self.model.p + 1)

    def recentered(self) -> "Wave":
        from .minimize import center

        return Wave.from_field(self.model, self.grid, center(self.grid, self.field),
                               solver=self.solver, iterations=self.iterations, info=self.info)
