"""Integral identities, interpolation-inequality probes and mass sweeps."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import minimize as mn
from . import models as M
from .grid import SpectralGrid


# ---------------------------------------------------------------------------
# Pohozaev-type identities

@dataclass
class PohozaevResult:
    r1: float
    r2: float
    r3: float
    raw: tuple
    combination_defect: float

    def as_tuple(self) -> tuple:
        return self.r1, self.r2, self.r3


def pohozaev_terms(wave) -> dict:
    """``A = ||Delta phi||^2``, ``B = <beta phi, phi>``, ``C = ||phi||_{p+1}^{p+1}``, ``D = ||phi||^2``."""
    g, f = wave.grid, wave.field
    return {
        "A": M.bilaplacian_energy(g, f),
        "B": M.second_order_energy(wave.model, g, f),
        "C": wave.lp_p1,
        "D": g.mass(f),
    }


def pohozaev_coefficients(dim: int, p: float) -> tuple:
    alpha = dim * (p - 1)
    beta = 2 * (p + 1)
    return (alpha - beta) / beta, (alpha - 2 * beta) / beta, alpha, beta


def pohozaev_residuals(wave) -> PohozaevResult:
    """Relative residuals of the three identities every decaying solution satisfies.

    With ``alpha = d(p-1)`` and ``beta = 2(p+1)``::

        A = (alpha-beta)/beta C + omega D
        B = (alpha-2beta)/beta C + 2 omega D
        (alpha-2beta) A - (alpha-beta) B + alpha omega D = 0

    The third is a fixed combination of the first two; ``combination_defect``
    measures how well the directly evaluated third residual matches it.
    """
    t = pohozaev_terms(wave)
    A, B, C, D = t["A"], t["B"], t["C"], t["D"]
    om = wave.omega
    c1, c2, alpha, beta = pohozaev_coefficients(wave.grid.dim, wave.model.p)
    e1 = A - c1 * C - om * D
    e2 = B - c2 * C - 2 * om * D
    e3 = (alpha - 2 * beta) * A - (alpha - beta) * B + alpha * om * D
    s1 = abs(A) + abs(c1 * C) + abs(om * D)
    s2 = abs(B) + abs(c2 * C) + abs(2 * om * D)
    s3 = abs((alpha - 2 * beta) * A) + abs((alpha - beta) * B) + abs(alpha * om * D)

    def rel(e, s):
        return abs(e) / s if s > 0 else 0.0

    combo = (alpha - 2 * beta) * e1 - (alpha - beta) * e2
    defect = rel(e3 - combo, s3)
    return PohozaevResult(rel(e1, s1), rel(e2, s2), rel(e3, s3), (e1, e2, e3), defect)


def h2_norm_squared(grid: SpectralGrid, f: np.ndarray) -> float:
    return grid.quadratic_form((1 + grid.k_squared) ** 2, f)


def virial_residual(wave) -> float:
    """``|<r, x . grad phi>| / ||phi||_{H^2}^2`` with ``r`` the profile-equation residual.

    ``x`` is measured from the box center, so the wave should be centered.
    """
    g, f = wave.grid, wave.field
    norm = h2_norm_squared(g, f)
    if norm == 0.0:
        return 0.0
    r = M.el_residual_field(wave.model, g, f, wave.omega)
    weight = sum(x * d for x, d in zip(g.coords(), g.gradient(f)))
    return abs(g.inner(r, weight)) / norm


# ---------------------------------------------------------------------------
# Interpolation-inequality probes

@dataclass
class GNSFamily:
    """Dilation family used to test an interpolation inequality.

    ``modulated`` multiplies the Gaussian envelope by ``cos(sqrt(b/2) x)``,
    centring its spectrum on the minimum of the shifted Kawahara form; the
    default picks it automatically for Kawahara with ``b > 0``.
    """

    eps: tuple = tuple(np.geomspace(1e-2, 1e2, 9))
    modulated: bool | None = None
    quadrature: bool = True
    max_n: int = 16384


@dataclass
class GNSProbe:
    form: str
    rows: list
    exponent_small: float
    exponent_large: float
    fitted_small: float
    fitted_large: float
    verdict: str

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _form_kind(model) -> str:
    if model.family == "Kawahara":
        return "kawahara"
    if model.family == "MixedNLS":
        return "mixed"
    return "laplacian"


def _dilation_rates(kind: str, dim: int) -> tuple:
    """Power of ``eps`` applied to each axis: ``phi(x) = chi(eps^a1 x1, eps^a x')``."""
    if kind == "mixed":
        return (2.0,) + (1.0,) * (dim - 1)
    return (1.0,) * dim


def gns_exponents(model) -> tuple:
    """Symbolic power-law exponents of the probe ratio as ``eps -> 0`` and ``eps -> inf``."""
    kind = _form_kind(model)
    p, d = model.p, model.dim
    if kind == "kawahara":
        return (p - 5) / 2, (p - 9) / 2
    if kind == "mixed":
        return (d + 1) * (p - 1) / 2 - 4, (d + 1) * (p - 1) / 2 - 8
    return d * (p - 1) / 2 - 2, d * (p - 1) / 2 - 4


def _quadratic_symbol(model, grid: SpectralGrid) -> np.ndarray:
    kind = _form_kind(model)
    k2 = grid.k_squared
    if kind == "kawahara":
        b = model.b
        if b > 0:
            return (k2 - b / 2) ** 2
        return k2 * k2 + abs(b) * k2
    if kind == "mixed":
        k1 = grid.wavenumbers[0]
        return k2 * k2 + k1 * k1
    return k2 * k2 + k2


def gns_ratio_on_grid(model, grid: SpectralGrid, f: np.ndarray) -> float:
    """Direct quotient of spectrally computed integrals."""
    p = model.p
    num = grid.lp_norm(f, p + 1) ** (p + 1)
    den = grid.mass(f) ** ((p - 1) / 2) * grid.quadratic_form(_quadratic_symbol(model, grid), f)
    return num / den


def _gaussian_integrals(model, eps: float) -> float:
    """Closed-form probe ratio for ``chi = exp(-|y|^2/2)`` under the dilation family."""
    kind = _form_kind(model)
    p, d = model.p, model.dim
    a = [eps ** r for r in _dilation_rates(kind, d)]
    jac = float(np.prod(a))
    pid = math.pi ** (d / 2)
    mass = pid / jac
    lp = (2 * math.pi / (p + 1)) ** (d / 2) / jac
    a2 = [x * x for x in a]
    # ||d_ii chi||^2 = 3/4 pi^{d/2}, <d_ii chi, d_jj chi> = 1/4 pi^{d/2}, ||d_i chi||^2 = 1/2 pi^{d/2}
    bilap = pid / jac * (0.75 * sum(x * x for x in a2) + 0.25 * (sum(a2) ** 2 - sum(x * x for x in a2)))
    grad = [0.5 * pid / jac * x for x in a2]
    if kind == "kawahara":
        b = model.b
        # same form as the quadrature path: (k^2 - b/2)^2 for b > 0
        quad = bilap - b * grad[0] + b * b / 4 * mass if b > 0 else bilap + abs(b) * grad[0]
    elif kind == "mixed":
        quad = bilap + grad[0]
    else:
        quad = bilap + sum(grad)
    return lp / (mass ** ((p - 1) / 2) * quad)


def _probe_grid(model, eps: float, modulated: bool, max_n: int) -> SpectralGrid | None:
    kind = _form_kind(model)
    rates = _dilation_rates(kind, model.dim)
    scales = [eps ** r for r in rates]
    length = 2 * 10.0 / min(scales)
    carrier = math.sqrt(model.b / 2) if modulated else 0.0
    k_need = carrier + 10.0 * max(scales)
    n = 64
    while math.pi * n / length < k_need:
        n *= 2
    if n > max_n or (model.dim == 2 and n > 256):
        return None
    return SpectralGrid(model.dim, n, length)


def probe_profile(model, grid: SpectralGrid, eps: float, modulated: bool) -> np.ndarray:
    kind = _form_kind(model)
    rates = _dilation_rates(kind, model.dim)
    arg = sum((eps ** r * x) ** 2 for r, x in zip(rates, grid.coords()))
    f = np.exp(-0.5 * arg)
    if modulated:
        f = f * np.cos(math.sqrt(model.b / 2) * grid.coords()[0])
    return f


def gns_probe(model, family: GNSFamily | None = None) -> GNSProbe:
    """Evaluate the interpolation ratio along a dilation family.

    ``ratio = ||phi||_{p+1}^{p+1} / (||phi||_2^{p-1} Q[phi])`` with ``Q`` the
    quadratic form matching the model.  A ratio growing without bound at
    either end of the family means the inequality ``ratio <= c`` fails.
    """
    family = family or GNSFamily()
    eps = np.sort(np.asarray(family.eps, dtype=float))
    if np.any(eps <= 0):
        raise ValueError("dilation parameters must be positive")
    kind = _form_kind(model)
    modulated = family.modulated
    if modulated is None:
        modulated = kind == "kawahara" and model.b > 0
    if modulated and not (kind == "kawahara" and model.b > 0):
        raise ValueError("modulated family needs a Kawahara model with b > 0")
    rows = []
    for e in eps:
        closed = None if modulated else _gaussian_integrals(model, e)
        quad = None
        if family.quadrature or modulated:
            g = _probe_grid(model, e, modulated, family.max_n)
            if g is not None:
                quad = gns_ratio_on_grid(model, g, probe_profile(model, g, e, modulated))
        ratio = closed if closed is not None else quad
        rows.append({"eps": float(e), "ratio": ratio, "closed_form": closed, "quadrature": quad})
    ex_small, ex_large = gns_exponents(model)
    fit_small = _fit_slope([r for r in rows if r["eps"] <= 0.1])
    fit_large = _fit_slope([r for r in rows if r["eps"] >= 10.0])
    fails = (fit_small is not None and fit_small < -0.05) or (fit_large is not None and fit_large > 0.05)
    return GNSProbe(form=kind, rows=rows, exponent_small=ex_small, exponent_large=ex_large,
                    fitted_small=fit_small, fitted_large=fit_large,
                    verdict="fails" if fails else "bounded")


def _fit_slope(rows) -> float | None:
    pts = [(r["eps"], r["ratio"]) for r in rows if r["ratio"] is not None and r["ratio"] > 0]
    if len(pts) < 2:
        return None
    x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# Mass sweeps

@dataclass
class SweepRow:
    lam: float
    m: float | None = None
    omega: float | None = None
    lp_norm_p1: float | None = None
    bilap: float | None = None
    second: float | None = None
    residual_sup: float | None = None
    residual_l2: float | None = None
    iterations: int = 0
    status: str = "ok"
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


CSV_HEADER = ["lambda", "m", "omega", "lp_norm_p1", "bilap", "second",
              "residual_sup", "residual_l2", "iterations", "status", "error"]


@dataclass
class Check:
    name: str
    status: str
    detail: str = ""
    worst: float | None = None


@dataclass
class PropertyReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.status == "PASS" for c in self.checks)

    def by_name(self) -> dict:
        return {c.name: c for c in self.checks}

    def to_json(self) -> str:
        return json.dumps({"passed": self.passed, "checks": [dataclasses.asdict(c) for c in self.checks]},
                          indent=2, sort_keys=True)


def _solve_row(args):
    model, grid, lam, cfg = args
    return _row_from_solve(model, grid, lam, cfg)


def _row_from_solve(model, grid, lam, cfg):
    try:
        w = mn.normalized_gradient_flow(model, grid, lam, cfg)
    except mn.SolveError as exc:
        return SweepRow(lam=float(lam), status=type(exc).__name__, error=str(exc)), None
    row = SweepRow(lam=float(lam), m=w.energy, omega=w.omega, lp_norm_p1=w.lp_p1,
                   bilap=M.bilaplacian_energy(grid, w.field),
                   second=M.second_order_energy(model, grid, w.field),
                   residual_sup=w.el_residual_sup, residual_l2=w.el_residual_l2,
                   iterations=w.iterations, status=w.info.get("status", "ok"))
    return row, w


def sweep(model, grid: SpectralGrid, lambda_grid, cfg: mn.SolveConfig | None = None,
          warm_start: bool = True, parallel: int = 1) -> tuple:
    """Solve along an ascending mass grid and check the structural properties of ``m`` and ``omega``.

    Warm starts reuse the previous minimizer rescaled to the new mass, which
    forces sequential execution.  ``parallel > 1`` runs cold starts in a
    process pool; rows are sorted by mass before checking either way.
    """
    lams = [float(x) for x in lambda_grid]
    if len(lams) < 4:
        raise ValueError("a sweep needs at least four masses")
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("mass grid must be strictly ascending")
    cfg = cfg or mn.SolveConfig()
    rows = []
    if parallel > 1 and not warm_start:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = [r for r, _ in pool.map(_solve_row, [(model, grid, lam, cfg) for lam in lams])]
    else:
        prev = None
        for lam in lams:
            c = cfg
            if warm_start and prev is not None:
                c = dataclasses.replace(cfg, seed_profile="FromFile", seed_field=prev)
            row, w = _row_from_solve(model, grid, lam, c)
            rows.append(row)
            if w is not None:
                prev = w.field
    rows.sort(key=lambda r: r.lam)
    return rows, property_report(model, rows, cfg)


def _skip(name, why):
    return Check(name, "SKIPPED", why)


def _judge(name, ok, detail, worst=None):
    return Check(name, "PASS" if ok else "FAIL", detail, None if worst is None else float(worst))


def property_report(model, rows, cfg: mn.SolveConfig | None = None) -> PropertyReport:
    cfg = cfg or mn.SolveConfig()
    good = [r for r in rows if r.ok]
    failed = len(good) != len(rows)
    lam = np.array([r.lam for r in good])
    m = np.array([r.m for r in good])
    om = np.array([r.omega for r in good])
    C = np.array([r.lp_norm_p1 for r in good])
    checks = []
    n = len(good)
    enough = n >= 3 and not failed
    why = "solver failures in sweep" if failed else "too few rows"

    # (i)
    if n:
        checks.append(_judge("i_negative", bool(np.all(m < 0)), "m < 0 on every row", m.max()))
    else:
        checks.append(_skip("i_negative", why))
    if not enough:
        for name in ["ii_decreasing", "iii_concave", "iv_derivative", "v_omega_monotone"]:
            checks.append(_skip(name, why))
    else:
        dm = np.diff(m)
        checks.append(_judge("ii_decreasing", bool(np.all(dm < 0)), "m strictly decreasing", dm.max()))
        h = np.diff(lam)
        second = (h[:-1] * m[2:] + h[1:] * m[:-2] - (h[:-1] + h[1:]) * m[1:-1]) / (0.5 * (h[:-1] + h[1:]))
        tol = 1e-6 * np.abs(m).max() + 4 * cfg.grad_tol * lam.max()
        checks.append(_judge("iii_concave", bool(np.all(second <= tol)),
                             f"second differences <= {tol:.3e}", second.max()))
        fd = (m[2:] - m[:-2]) / (lam[2:] - lam[:-2])
        rel = np.abs(fd + om[1:-1] / 2) / np.abs(om[1:-1] / 2)
        checks.append(_judge("iv_derivative", bool(np.all(rel < 0.05)), "|m' + omega/2| < 5% |omega/2|", rel.max()))
        dom = np.diff(om)
        checks.append(_judge("v_omega_monotone", bool(np.all(dom >= -1e-12)), "omega non-decreasing", dom.min()))
    # (vi)
    if n:
        bound = M.omega_lower_bound(model)
        checks.append(_judge("vi_omega_bound", bool(np.all(om > bound)), f"omega > {bound:g}", (om - bound).min()))
    else:
        checks.append(_skip("vi_omega_bound", why))
    if not enough:
        for name in ["vii_integral", "viii_omega_growth"]:
            checks.append(_skip(name, why))
    else:
        integral = float(np.sum(0.5 * (om[1:] + om[:-1]) * np.diff(lam)))
        rel = abs(integral + 2 * (m[-1] - m[0])) / abs(integral)
        checks.append(_judge("vii_integral", rel < 0.02, "trapezoid of omega vs -2 delta m within 2%", rel))
        dom = (om[2:] - om[:-2]) / (lam[2:] - lam[:-2])
        rhs = (model.p - 1) / (2 * lam[1:-1] ** 2) * C[1:-1] * (1 - 0.1)
        checks.append(_judge("viii_omega_growth", bool(np.all(dom >= rhs)),
                             "omega' >= 0.9 (p-1)/(2 lambda^2) ||phi||_{p+1}^{p+1}", (dom / rhs).min()))
    checks.append(_subadditivity(good, why if failed else None))
    checks.append(_small_mass(model, good, why if failed else None))
    return PropertyReport(checks)


def _subadditivity(rows, skip_reason) -> Check:
    if skip_reason:
        return _skip("ix_subadditive", skip_reason)
    table = {round(r.lam, 12): r.m for r in rows}
    tested, worst, ok = 0, -np.inf, True
    for r in rows:
        for frac in (0.25, 0.5):
            a, b = round(r.lam * frac, 12), round(r.lam * (1 - frac), 12)
            if a in table and b in table:
                gap = r.m - (table[a] + table[b])
                worst = max(worst, gap)
                ok &= gap < 0
                tested += 1
    if tested == 0:
        return _skip("ix_subadditive", "no row pairs (alpha, lambda - alpha) available")
    return _judge("ix_subadditive", bool(ok), f"{tested} splittings tested", worst)


def _small_mass(model, rows, skip_reason) -> Check:
    if skip_reason or len(rows) < 2:
        return _skip("x_small_mass", skip_reason or "too few rows")
    lam = np.array([r.lam for r in rows])
    ratio = np.array([r.m for r in rows]) / lam
    c = model.second_order_coefficient
    if c > 0:
        limit = -c * c / 8
        gap = ratio - limit
        # below the limit everywhere, and closer to it as the mass decreases
        ok = bool(np.all(gap <= 0) and np.all(np.diff(gap) <= 0))
        return _judge("x_small_mass", ok, f"m/lambda <= {limit:g}, gap shrinking as lambda decreases",
                      np.abs(gap).min())
    ok = bool(np.all(ratio < 0) and np.all(np.diff(ratio) <= 0))
    return _judge("x_small_mass", ok, "m/lambda < 0, approaching 0 as lambda decreases", np.abs(ratio).min())


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        vals = [r.lam, r.m, r.omega, r.lp_norm_p1, r.bilap, r.second, r.residual_sup,
                r.residual_l2, r.iterations, r.status, r.error]
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in vals])
    return buf.getvalue()


def rows_from_csv(text: str) -> list:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        def num(key, cast=float):
            return cast(rec[key]) if rec[key] != "" else None
        out.append(SweepRow(lam=num("lambda"), m=num("m"), omega=num("omega"),
                            lp_norm_p1=num("lp_norm_p1"), bilap=num("bilap"), second=num("second"),
                            residual_sup=num("residual_sup"), residual_l2=num("residual_l2"),
                            iterations=num("iterations", int), status=rec["status"],
                            error=rec["error"] or None))
    return out
