"""Command-line front end.

Exit codes: 0 success, 2 solver or verification failure, 3 regime refusal,
4 verdict Unstable under ``--expect-stable``, 5 I/O or parse error.  Errors
are also written to standard error as one JSON object.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import config as C
from . import diagnostics as dg
from . import minimize as mn
from . import models as M
from . import stability as st
from . import wavefile
from .grid import GridMismatch, SpectralGrid

EXIT_OK = 0
EXIT_SOLVE = 2
EXIT_REGIME = 3
EXIT_UNSTABLE = 4
EXIT_IO = 5

VERIFY_N = 1024
VERIFY_LENGTH = 160.0
SOLITON_OMEGA = 0.16


class VerificationFailed(RuntimeError):
    pass


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def thread_cap(requested: int) -> int:
    """Requested worker count, capped by ``GSF_THREADS`` when set."""
    cap = os.environ.get("GSF_THREADS")
    if cap:
        try:
            return max(1, min(requested, int(cap)))
        except ValueError:
            raise C.ConfigError(f"GSF_THREADS must be an integer, got {cap!r}") from None
    return max(1, requested)


def write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_columns(path, a, b) -> None:
    lines = [f"{x!r} {y!r}" for x, y in zip(map(float, a), map(float, b))]
    write_text(path, "\n".join(lines) + "\n")


def _out(cfg, args, attr, key):
    value = getattr(args, attr, None) or cfg.get(key)
    if not value:
        return None
    path = Path(value)
    if not path.is_absolute():
        path = Path(cfg.get("output.dir")) / path
    return path


# ---------------------------------------------------------------------------
# argument parsing

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. --set model.p=3")
    p.add_argument("--variant", choices=C.VARIANTS, help="model family (model.variant)")
    p.add_argument("--b", type=float, help="second-order coefficient (model.b)")
    p.add_argument("--epsilon", type=int, choices=(-1, 1), help="sign for MixedNLS (model.epsilon)")
    p.add_argument("--bmag", type=float, help="|b| for MixedNLS (model.bmag)")
    p.add_argument("--p", type=float, help="nonlinearity power (model.p)")
    p.add_argument("--dim", type=int, choices=(1, 2), help="spatial dimension (model.dim)")
    p.add_argument("--n", type=int, help="points per axis (grid.n)")
    p.add_argument("--length", type=float, help="box length (grid.length)")
    p.add_argument("--force", action="store_true", help="solve even when the energy is unbounded below")
    p.add_argument("--out-dir", help="directory for relative output paths (output.dir)")
    p.add_argument("--report", help="JSON report path (output.report)")


_FLAG_KEYS = {"variant": "model.variant", "b": "model.b", "epsilon": "model.epsilon",
              "bmag": "model.bmag", "p": "model.p", "dim": "model.dim", "n": "grid.n",
              "length": "grid.length", "out_dir": "output.dir", "lam": "task.lambda",
              "omega": "task.omega", "lambdas": "task.lambda_grid", "eps": "task.eps",
              "kind": "task.probe", "parallel": "task.parallel", "format": "output.format"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="normwave", description="Normalized ground states of "
                                     "fourth-order dispersive models: solve, check and analyze.")
    parser.add_argument("--print-defaults", action="store_true", help="print every config key with its default")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("solve", help="constrained minimization at fixed mass")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float, help="mass ||phi||^2 (task.lambda)")
    p.add_argument("--wave", help="write the wave file here (output.wave)")

    p = sub.add_parser("petviashvili", help="fixed-omega Petviashvili iteration")
    _common(p)
    p.add_argument("--omega", type=float, help="frequency or speed (task.omega)")
    p.add_argument("--wave", help="write the wave file here (output.wave)")

    p = sub.add_parser("stability", help="linearized spectra and stability verdict")
    _common(p)
    p.add_argument("--wave", help="analyze this wave file instead of solving")
    p.add_argument("--lambda", dest="lam", type=float, help="mass used when solving (task.lambda)")
    p.add_argument("--cross-check", action="store_true", help="also solve the 2N block problem (NLS)")
    p.add_argument("--expect-stable", action="store_true", help="exit 4 when the verdict is Unstable")
    p.add_argument("--plot", help="prefix for two-column spectrum data (output.plot)")

    p = sub.add_parser("sweep", help="solve over a mass grid and check m(lambda), omega(lambda)")
    _common(p)
    p.add_argument("--lambdas", type=C._float_list, help="'a, b, c' or 'start:stop:count' (task.lambda_grid)")
    p.add_argument("--parallel", type=int, help="worker processes for cold starts (task.parallel)")
    p.add_argument("--cold", action="store_true", help="cold-start every row (task.warm_start = false)")
    p.add_argument("--csv", help="row table path (output.csv)")
    p.add_argument("--plot", help="prefix for m(lambda) and omega(lambda) data (output.plot)")

    p = sub.add_parser("probe", help="dilation probes of the energy or of interpolation inequalities")
    _common(p)
    p.add_argument("--kind", choices=("scaling", "gns"), help="probe type (task.probe)")
    p.add_argument("--wave", help="wave file for the scaling probe (default: seed profile)")
    p.add_argument("--eps", type=C._float_list, help="dilation factors (task.eps)")
    p.add_argument("--lambda", dest="lam", type=float, help="mass of the seed profile (task.lambda)")

    p = sub.add_parser("verify", help="exact-soliton battery")
    p.add_argument("--n", type=int, default=VERIFY_N, help=f"points (default {VERIFY_N})")
    p.add_argument("--length", type=float, default=VERIFY_LENGTH, help=f"box length (default {VERIFY_LENGTH:g})")
    p.add_argument("--report", help="JSON report path")

    p = sub.add_parser("export", help="convert a wave file to text")
    p.add_argument("wave", help="input wave file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", help="output path (default: input with the format's extension)")
    return parser


def run_config(args) -> C.RunConfig:
    text = ""
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise C.ConfigError(f"cannot read config {args.config}: {exc}") from None
    overrides = {}
    for item in getattr(args, "set", []) or []:
        key, value = C.parse_override(item)
        overrides[key] = value
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "force", False):
        overrides["solve.force"] = True
    if getattr(args, "cross_check", False):
        overrides["task.cross_check"] = True
    if getattr(args, "expect_stable", False):
        overrides["task.expect_stable"] = True
    if getattr(args, "cold", False):
        overrides["task.warm_start"] = False
    return C.build(text, overrides)


# ---------------------------------------------------------------------------
# subcommands

def wave_summary(w) -> dict:
    return {
        "model": w.model.tag(),
        "grid": wavefile.grid_to_dict(w.grid),
        "lambda": w.lam,
        "omega": w.omega,
        "energy": w.energy,
        "el_residual_sup": w.el_residual_sup,
        "el_residual_l2": w.el_residual_l2,
        "solver": w.solver.value,
        "iterations": w.iterations,
        "status": w.info.get("status"),
    }


def _finish(cfg, args, payload: dict) -> dict:
    report = _out(cfg, args, "report", "output.report")
    if report:
        write_text(report, dumps(payload) + "\n")
    return payload


def cmd_solve(args):
    cfg = run_config(args)
    model = cfg.model()
    grid = cfg.grid(model.dim)
    w = mn.normalized_gradient_flow(model, grid, cfg.get("task.lambda"), cfg.solve())
    path = _out(cfg, args, "wave", "output.wave")
    if path:
        path.parent.mkdir(parents=True, exist_ok=True)
        wavefile.save(path, w)
    return EXIT_OK, _finish(cfg, args, wave_summary(w))


def cmd_petviashvili(args):
    cfg = run_config(args)
    model = cfg.model()
    grid = cfg.grid(model.dim)
    w = mn.petviashvili(model, grid, cfg.get("task.omega"), cfg.solve())
    path = _out(cfg, args, "wave", "output.wave")
    if path:
        path.parent.mkdir(parents=True, exist_ok=True)
        wavefile.save(path, w)
    return EXIT_OK, _finish(cfg, args, wave_summary(w))


def _wave_for(cfg, args):
    if getattr(args, "wave", None):
        return wavefile.load(args.wave)
    model = cfg.model()
    return mn.normalized_gradient_flow(model, cfg.grid(model.dim), cfg.get("task.lambda"), cfg.solve())


def cmd_stability(args):
    cfg = run_config(args)
    w = _wave_for(cfg, args)
    rep = st.analyze(w, cross_check=cfg.get("task.cross_check"))
    plot = _out(cfg, args, "plot", "output.plot")
    if plot:
        mu = rep.eigenvalues
        write_columns(f"{plot}_spectrum.dat", mu.real, mu.imag)
    payload = {"wave": wave_summary(w), "stability": rep.to_dict()}
    _finish(cfg, args, payload)
    code = EXIT_OK
    if cfg.get("task.expect_stable") and rep.verdict is st.Verdict.Unstable:
        code = EXIT_UNSTABLE
    return code, payload


def cmd_sweep(args):
    cfg = run_config(args)
    model = cfg.model()
    grid = cfg.grid(model.dim)
    warm = cfg.get("task.warm_start")
    workers = thread_cap(cfg.get("task.parallel"))
    if warm:
        workers = 1
    rows, report = dg.sweep(model, grid, cfg.get("task.lambda_grid"), cfg.solve(),
                            warm_start=warm, parallel=workers)
    csv_path = _out(cfg, args, "csv", "output.csv")
    if csv_path:
        write_text(csv_path, dg.rows_to_csv(rows))
    plot = _out(cfg, args, "plot", "output.plot")
    if plot:
        ok = [r for r in rows if r.ok]
        write_columns(f"{plot}_m.dat", [r.lam for r in ok], [r.m for r in ok])
        write_columns(f"{plot}_omega.dat", [r.lam for r in ok], [r.omega for r in ok])
    payload = json.loads(report.to_json())
    payload.update({"model": model.tag(), "rows": len(rows), "failed_rows": sum(not r.ok for r in rows),
                    "warm_start": warm, "workers": workers})
    return EXIT_OK, _finish(cfg, args, payload)


def cmd_probe(args):
    cfg = run_config(args)
    eps = cfg.get("task.eps")
    kind = cfg.get("task.probe")
    if kind == "gns":
        model = cfg.model()
        res = dg.gns_probe(model, dg.GNSFamily(eps=tuple(eps)))
        payload = {"model": model.tag(), "kind": "gns", **res.to_dict()}
    elif kind == "scaling":
        if getattr(args, "wave", None):
            w = wavefile.load(args.wave)
            model, grid, f = w.model, w.grid, w.field
        else:
            model = cfg.model()
            grid = cfg.grid(model.dim)
            f = mn.seed(grid, cfg.solve(), cfg.get("task.lambda"))
        rows = mn.scaling_probe(model, grid, f, eps)
        payload = {"model": model.tag(), "kind": "scaling", "rows": rows}
    else:
        raise C.ConfigError(f"task.probe must be 'scaling' or 'gns', got {kind!r}")
    return EXIT_OK, _finish(cfg, args, payload)


def soliton(grid: SpectralGrid) -> np.ndarray:
    """``sqrt(3/10) sech^2(x / sqrt(20))``, an exact wave at omega = 4/25."""
    x = grid.x1
    return math.sqrt(0.3) / np.cosh(x / math.sqrt(20.0)) ** 2


def verify_battery(n: int = VERIFY_N, length: float = VERIFY_LENGTH) -> dict:
    grid = SpectralGrid(1, n, length)
    phi = soliton(grid)
    checks = []

    def check(name, ok, value):
        checks.append({"name": name, "status": "PASS" if ok else "FAIL", "value": value})

    for model in (M.MixedNLS(-1, 1.0, 3.0), M.Kawahara(-1.0, 3.0)):
        tag = model.tag()
        sup, _ = M.el_residual(model, grid, phi, SOLITON_OMEGA)
        check(f"{tag}: EL residual sup < 1e-8", sup < 1e-8, sup)
        om = M.omega_from_field(model, grid, phi)
        check(f"{tag}: omega = 0.16 +- 1e-9", abs(om - SOLITON_OMEGA) <= 1e-9, om)
        w = M.Wave.from_field(model, grid, phi, omega=SOLITON_OMEGA)
        rep = st.analyze(w)
        check(f"{tag}: vk index < 0", rep.vk_index is not None and rep.vk_index < 0, rep.vk_index)
        check(f"{tag}: verdict Stable", rep.verdict is st.Verdict.Stable, rep.verdict.value)
    lam = grid.mass(phi)
    check("mass = 4/sqrt(5)", abs(lam - 4 / math.sqrt(5)) < 1e-9, lam)
    return {"grid": wavefile.grid_to_dict(grid), "checks": checks,
            "passed": all(c["status"] == "PASS" for c in checks)}


def cmd_verify(args):
    payload = verify_battery(args.n, args.length)
    if args.report:
        write_text(args.report, dumps(payload) + "\n")
    return (EXIT_OK if payload["passed"] else EXIT_SOLVE), payload


def export_text(w, fmt: str) -> str:
    coords = [c.ravel() for c in w.grid.coords()]
    values = w.field.ravel()
    if fmt == "csv":
        names = ["x"] if w.grid.dim == 1 else ["x1", "x2"]
        lines = [",".join(names + ["phi"])]
        for i in range(values.size):
            lines.append(",".join(repr(float(c[i])) for c in coords) + "," + repr(float(values[i])))
        return "\n".join(lines) + "\n"
    header = wave_summary(w)
    header["model_params"] = wavefile.model_to_dict(w.model)
    return dumps({"header": header, "field": w.field.tolist()}) + "\n"


def cmd_export(args):
    w = wavefile.load(args.wave)
    out = args.output or str(Path(args.wave).with_suffix("." + args.format))
    write_text(out, export_text(w, args.format))
    return EXIT_OK, {"output": out, "format": args.format, "lambda": w.lam}


COMMANDS = {"solve": cmd_solve, "petviashvili": cmd_petviashvili, "stability": cmd_stability,
            "sweep": cmd_sweep, "probe": cmd_probe, "verify": cmd_verify, "export": cmd_export}


def _fail(code: int, exc: BaseException) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    line = getattr(exc, "line", None)
    if line is not None:
        err["line"] = line
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_defaults:
        sys.stdout.write(C.documented_defaults())
        return EXIT_OK
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_IO
    try:
        code, payload = COMMANDS[args.command](args)
    except (mn.RegimeRefused, mn.SymbolNotPositive) as exc:
        return _fail(EXIT_REGIME, exc)
    except mn.SolveError as exc:
        return _fail(EXIT_SOLVE, exc)
    except (C.ConfigError, wavefile.WaveFileError, GridMismatch, OSError) as exc:
        return _fail(EXIT_IO, exc)
    sys.stdout.write(dumps(payload) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
