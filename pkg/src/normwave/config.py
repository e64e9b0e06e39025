"""Flat ``section.key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
Every key belongs to one of the sections ``model``, ``grid``, ``solve``,
``task`` or ``output``.  Unknown keys, malformed values and duplicates are
rejected with the offending line number.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import models as M
from .grid import SpectralGrid
from .minimize import SolveConfig


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _float_list(text: str) -> tuple:
    """``a, b, c`` or ``start:stop:count`` (inclusive, evenly spaced)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("range form is start:stop:count")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 2:
            raise ValueError("range needs at least two points")
        return tuple(a + (b - a) * i / (n - 1) for i in range(n))
    return tuple(float(x) for x in text.split(",") if x.strip())


def _str(text: str) -> str:
    return text.strip()


# key -> (parser, default); defaults of solve.* come from SolveConfig
SCHEMA = {
    "model.variant": (_str, "MixedNLS"),
    "model.b": (float, 1.0),
    "model.epsilon": (int, -1),
    "model.bmag": (float, 1.0),
    "model.p": (float, 3.0),
    "model.dim": (int, 1),
    "grid.n": (int, None),
    "grid.length": (float, None),
    "grid.dealias": (_bool, False),
    "task.lambda": (float, 4 / 5 ** 0.5),
    "task.omega": (float, 0.16),
    "task.lambda_grid": (_float_list, (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0)),
    "task.eps": (_float_list, (0.25, 0.5, 2.0, 4.0)),
    "task.probe": (_str, "scaling"),
    "task.cross_check": (_bool, False),
    "task.expect_stable": (_bool, False),
    "task.warm_start": (_bool, True),
    "task.parallel": (int, 1),
    "output.dir": (_str, "."),
    "output.wave": (_str, ""),
    "output.report": (_str, ""),
    "output.csv": (_str, ""),
    "output.plot": (_str, ""),
    "output.format": (_str, "csv"),
}

_SOLVE_PARSERS = {"max_iters": int, "step0": float, "grad_tol": float, "energy_stall_tol": float,
                  "stall_patience": int, "seed_profile": _str, "seed_width": float,
                  "center_after": _bool, "collapse_floor": float, "collapse_exponent": float,
                  "force": _bool}
for _name, _parse in _SOLVE_PARSERS.items():
    SCHEMA[f"solve.{_name}"] = (_parse, getattr(SolveConfig(), _name))

VARIANTS = ("Kawahara", "MixedNLS", "LaplacianNLS")


def parse_text(text: str) -> dict:
    """Parse config text into ``{key: (value, line)}``."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in out:
            raise ConfigError(f"duplicate key {key!r} (first set on line {out[key][1]})", lineno)
        parser = SCHEMA[key][0]
        try:
            out[key] = (parser(value), lineno)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno) from None
    return out


def parse_override(item: str) -> tuple:
    """``key=value`` from the command line."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, value = (s.strip() for s in item.split("=", 1))
    if key not in SCHEMA:
        raise ConfigError(f"unknown key {key!r}")
    try:
        return key, SCHEMA[key][0](value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)

    def get(self, key):
        return self.values.get(key, SCHEMA[key][1])

    def model(self):
        variant = self.get("model.variant")
        p = self.get("model.p")
        try:
            if variant == "Kawahara":
                return M.Kawahara(self.get("model.b"), p)
            if variant == "MixedNLS":
                return M.MixedNLS(self.get("model.epsilon"), self.get("model.bmag"), p, self.get("model.dim"))
            if variant == "LaplacianNLS":
                return M.LaplacianNLS(self.get("model.b"), p, self.get("model.dim"))
        except ValueError as exc:
            raise ConfigError(f"model: {exc}", self._line("model.p")) from None
        raise ConfigError(f"model.variant must be one of {VARIANTS}, got {variant!r}",
                          self._line("model.variant"))

    def grid(self, dim: int):
        default = SpectralGrid.default(dim)
        n = self.get("grid.n") or default.n
        length = self.get("grid.length") or default.length
        try:
            return SpectralGrid(dim, n, length, self.get("grid.dealias"))
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}", self._line("grid.n")) from None

    def solve(self) -> SolveConfig:
        kw = {name: self.get(f"solve.{name}") for name in _SOLVE_PARSERS}
        try:
            return SolveConfig(**kw)
        except ValueError as exc:
            raise ConfigError(f"solve: {exc}") from None

    def _line(self, key):
        return self.lines.get(key)


def build(text: str = "", overrides: dict | None = None) -> RunConfig:
    """Config from file text, then ``overrides`` (already parsed values) on top."""
    parsed = parse_text(text) if text else {}
    values = {k: v for k, (v, _) in parsed.items()}
    lines = {k: ln for k, (_, ln) in parsed.items()}
    values.update(overrides or {})
    return RunConfig(values=values, lines=lines)


def documented_defaults() -> str:
    """All keys with their defaults, in config-file syntax."""
    lines = []
    for key in sorted(SCHEMA):
        default = SCHEMA[key][1]
        if isinstance(default, tuple):
            default = ", ".join(repr(x) for x in default)
        elif default is None:
            default = "(per dimension)"
        lines.append(f"{key} = {default}")
    return "\n".join(lines) + "\n"


def to_text(cfg: RunConfig) -> str:
    lines = []
    for key in sorted(cfg.values):
        v = cfg.values[key]
        if isinstance(v, tuple):
            v = ", ".join(repr(x) for x in v)
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"
