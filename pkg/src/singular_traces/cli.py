"""Command-line front end: trace, verify, eigs, decay and sweep.

Exit codes: 0 ok, 1 verification gap above tolerance, 2 usage or domain error,
3 not converged, 4 numerical failure.  Data go to stdout, messages to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

import numpy as np

from .birman_schwinger import bs_spectrum
from .errors import DomainError, NumericError, TraceError, UsageError
from .geometry import Coupling, EnginePlan, FormulaId, Geometry
from .ntd import schatten_decay_probe
from .oracle_fd import OracleConfig, oracle_eigenvalues, oracle_trace
from .trace_engine import deltaprime_identity, sweep, trace_formula

EXIT_OK = 0
EXIT_GAP = 1
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_NUMERIC = 4


def parse_range(text: str) -> tuple[int, int]:
    """``"a..b"`` (inclusive) or a single integer."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return int(lo), int(hi)
        k = int(text)
        return k, k
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a..b' or an integer, got {text!r}") from None


def parse_pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
        return a, b
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}") from None


def _add_geometry(p):
    p.add_argument("--dim", type=int, default=2, choices=(2, 3))
    p.add_argument("--radius", type=float, default=1.0)


def _add_output(p, default="json"):
    p.add_argument("--format", choices=("json", "csv", "human"), default=default)
    p.add_argument("--no-timing", action="store_true",
                   help="omit wall_time_ms so that output is byte-for-byte reproducible")


def _add_formula(p, default="delta-vs-free"):
    p.add_argument("--formula", default=default,
                   help="delta-vs-free, deltaprime-vs-neumann, deltaprime-vs-free, neumann-vs-free")
    p.add_argument("--alpha", type=float, default=None, help="delta coupling strength")
    p.add_argument("--omega", type=float, default=None, help="delta-prime coupling strength")
    p.add_argument("--m", type=int, default=1, help="resolvent power")


def _add_tolerances(p):
    p.add_argument("--rel-tol", type=float, default=1e-6)
    p.add_argument("--abs-tol", type=float, default=1e-12)
    p.add_argument("--mode-cap", default="auto", help="'auto' or a fixed highest mode index")


def _add_oracle(p):
    p.add_argument("--grid-points", type=int, default=8000)
    p.add_argument("--r-max", type=float, default=None, help="default 40 R")
    p.add_argument("--oracle-mode-cap", type=int, default=60)
    p.add_argument("--pairing", choices=("pivot", "sorted"), default="pivot")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for the oracle (default: $SINGULAR_TRACES_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="singular-traces",
        description="Trace formulae for Schroedinger operators with delta / delta-prime "
                    "interactions on a circle or sphere.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="evaluate a trace formula as a mode sum")
    _add_geometry(p)
    _add_formula(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    _add_tolerances(p)
    p.add_argument("--per-mode", action="store_true", help="include per-mode terms")
    _add_output(p)

    p = sub.add_parser("verify", help="compare the mode sum with the finite-difference oracle")
    _add_geometry(p)
    _add_formula(p)
    p.set_defaults(alpha=0.8)
    p.add_argument("--lambda", dest="lam", type=float, default=-2.0)
    p.add_argument("--tol", type=float, default=5e-3, help="relative gap tolerance")
    _add_tolerances(p)
    _add_oracle(p)
    p.add_argument("--identity", choices=("deltaprime-split",), default=None,
                   help="check deltaprime_vs_free = deltaprime_vs_neumann + neumann_vs_free "
                        "instead of running the oracle")
    p.add_argument("--identity-tol", type=float, default=1e-10)
    _add_output(p)

    p = sub.add_parser("eigs", help="discrete eigenvalues from the Birman-Schwinger condition")
    _add_geometry(p)
    p.add_argument("--model", choices=("delta", "delta-prime"), default="delta")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--modes", type=parse_range, default=None, help="'a..b'; default: all modes")
    p.add_argument("--bracket", type=parse_pair, default=None, help="'a,b' with a < b < 0")
    p.add_argument("--cross-check", action="store_true", help="append oracle eigenvalues")
    _add_oracle(p)
    _add_output(p, default="human")

    p = sub.add_parser("decay", help="fit the decay exponent of boundary-map derivatives")
    _add_geometry(p)
    p.add_argument("--which", choices=("m-tilde", "m-hat"), default="m-tilde")
    p.add_argument("--k", type=int, default=0, help="derivative order")
    p.add_argument("--lambda", dest="lam", type=float, default=-1.0)
    p.add_argument("--n", type=parse_range, default=(100, 1000), help="mode range 'a..b'")
    p.add_argument("--against", choices=("index", "rank"), default="index")
    _add_output(p, default="human")

    p = sub.add_parser("sweep", help="evaluate a trace formula over a lambda grid")
    _add_geometry(p)
    _add_formula(p)
    p.add_argument("--lambda-from", type=float, default=-10.0)
    p.add_argument("--lambda-to", type=float, default=-0.5)
    p.add_argument("--steps", type=int, default=100)
    _add_tolerances(p)
    _add_output(p, default="csv")
    return parser


# -- helpers -----------------------------------------------------------------

def _coupling(args, which: FormulaId) -> Coupling | None:
    model = which.model
    if model is None:
        return None
    value = args.alpha if model == "delta" else args.omega
    if value is None:
        flag = "--alpha" if model == "delta" else "--omega"
        raise UsageError(f"{which.value} needs {flag}")
    return Coupling(model, value)


def _mode_cap(text):
    if text == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"--mode-cap must be 'auto' or an integer, got {text!r}") from None


def _plan(args, lam: float, keep=False) -> EnginePlan:
    cap = _mode_cap(args.mode_cap)
    return EnginePlan(m=args.m, lam0=lam, mode_cap=cap, abs_tol=args.abs_tol,
                      rel_tol=args.rel_tol, adaptive=(cap == "auto"), keep_per_mode=keep)


def _oracle_cfg(args) -> OracleConfig:
    return OracleConfig(grid_points=args.grid_points, r_max=args.r_max,
                        pairing=args.pairing, mode_cap=args.oracle_mode_cap, threads=args.threads)


def _request(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in ("format", "no_timing"):
            continue
        out[key] = list(value) if isinstance(value, tuple) else value
    return out


def _plain(obj):
    """Convert numpy scalars and containers to plain Python for serialisation."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _emit(args, result: dict, diagnostics: dict, started: float, rows=None, columns=None):
    result, diagnostics = _plain(result), _plain(diagnostics)
    rows = None if rows is None else _plain(rows)
    if not args.no_timing:
        diagnostics["wall_time_ms"] = round((time.perf_counter() - started) * 1e3, 3)
    if args.format == "json":
        doc = {"request": _request(args), "result": result, "diagnostics": diagnostics}
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    elif args.format == "csv":
        buf = io.StringIO()
        if rows is None:
            rows = [result]
            columns = list(result)
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        if rows:
            writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        sys.stdout.write(buf.getvalue())
    else:
        if rows is not None:
            if rows:
                widths = {c: max(len(c), *(len(_fmt(r.get(c))) for r in rows)) for c in columns}
                sys.stdout.write("  ".join(c.ljust(widths[c]) for c in columns) + "\n")
                for r in rows:
                    sys.stdout.write("  ".join(_fmt(r.get(c)).ljust(widths[c]) for c in columns) + "\n")
            else:
                sys.stdout.write("(no rows)\n")
            for k, v in result.items():
                if k != "rows":
                    sys.stdout.write(f"{k}: {_fmt(v)}\n")
        else:
            for k, v in result.items():
                sys.stdout.write(f"{k}: {_fmt(v)}\n")
        for k, v in diagnostics.items():
            sys.stderr.write(f"{k}: {_fmt(v)}\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return "" if v is None else str(v)


# -- subcommands -------------------------------------------------------------

def cmd_trace(args) -> int:
    started = time.perf_counter()
    which = FormulaId.parse(args.formula)
    geom = Geometry(args.dim, args.radius)
    res = trace_formula(which, geom, _coupling(args, which), args.m, args.lam,
                        _plan(args, args.lam, keep=args.per_mode))
    _emit(args, res.to_dict(include_per_mode=args.per_mode),
          {"modes_used": res.modes_used, "tail_bound": res.tail_bound}, started)
    if not res.converged:
        sys.stderr.write(f"not converged after {res.modes_used} modes "
                         f"(tail bound {res.tail_bound:.3g})\n")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_verify(args) -> int:
    started = time.perf_counter()
    geom = Geometry(args.dim, args.radius)
    if args.identity:
        if args.omega is None:
            raise UsageError("--identity deltaprime-split needs --omega")
        cap = _mode_cap(args.mode_cap)
        chk = deltaprime_identity(geom, args.omega, args.m, args.lam,
                                  mode_cap=400 if cap == "auto" else cap)
        ok = chk.rel_gap <= args.identity_tol and chk.per_mode_max_rel_gap <= args.identity_tol
        result = {"identity": args.identity, "lhs": chk.lhs, "rhs": chk.rhs,
                  "rel_gap": chk.rel_gap, "per_mode_max_rel_gap": chk.per_mode_max_rel_gap,
                  "tol": args.identity_tol, "pass": ok}
        _emit(args, result, {"modes_used": chk.modes, "tail_bound": 0.0}, started)
        return EXIT_OK if ok else EXIT_GAP

    which = FormulaId.parse(args.formula)
    coupling = _coupling(args, which)
    eng = trace_formula(which, geom, coupling, args.m, args.lam, _plan(args, args.lam))
    orc = oracle_trace(which, geom, coupling, args.m, args.lam, _oracle_cfg(args))
    gap = abs(eng.value - orc.value)
    scale = max(abs(eng.value), abs(orc.value))
    rel = gap / scale if scale > 0 else 0.0
    ok = rel <= args.tol
    result = {"formula": which.value, "engine": eng.value, "oracle": orc.value,
              "abs_gap": gap, "rel_gap": rel, "tol": args.tol, "pass": ok,
              "oracle_error_estimate": orc.error_estimate, "engine_converged": eng.converged}
    _emit(args, result, {"modes_used": eng.modes_used, "tail_bound": eng.tail_bound}, started)
    if not eng.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK if ok else EXIT_GAP


def cmd_eigs(args) -> int:
    started = time.perf_counter()
    geom = Geometry(args.dim, args.radius)
    model = "delta" if args.model == "delta" else "delta_prime"
    strength = args.alpha if model == "delta" else args.omega
    if strength is None:
        raise UsageError(f"--model {args.model} needs {'--alpha' if model == 'delta' else '--omega'}")
    modes = None if args.modes is None else range(args.modes[0], args.modes[1] + 1)
    if strength == 0:
        raise UsageError("coupling strength must be non-zero")
    scan = bs_spectrum(model, geom, strength, modes, args.bracket)
    rows = []
    cfg = _oracle_cfg(args) if args.cross_check else None
    for r in scan.roots:
        row = {"mode": r.mode.index, "lambda": r.lam, "multiplicity": r.multiplicity,
               "residual": r.residual}
        if cfg is not None:
            ev = oracle_eigenvalues(model, r.mode, geom, Coupling(model, strength), cfg)
            match = float(ev[np.argmin(np.abs(ev - r.lam))]) if ev.size else None
            row["oracle_lambda"] = match
            row["gap"] = None if match is None else abs(match - r.lam)
            row["oracle_count"] = int(ev.size)
        rows.append(row)
    columns = ["mode", "lambda", "multiplicity", "residual"]
    if cfg is not None:
        columns += ["oracle_lambda", "gap", "oracle_count"]
    result = {"model": model, "strength": strength, "cutoff_mode": scan.cutoff_mode,
              "modes_scanned": scan.modes_scanned, "rows": rows}
    if args.format == "json":
        _emit(args, result, {"modes_used": scan.modes_scanned, "tail_bound": 0.0}, started)
    else:
        _emit(args, {k: v for k, v in result.items() if k != "rows"},
              {"modes_used": scan.modes_scanned, "tail_bound": 0.0}, started, rows, columns)
    return EXIT_OK


def cmd_decay(args) -> int:
    started = time.perf_counter()
    geom = Geometry(args.dim, args.radius)
    fit = schatten_decay_probe(args.which, args.k, geom, args.lam, args.n, args.against)
    result = {"which": args.which, "k": args.k, "exponent": fit.exponent,
              "prefactor": fit.prefactor, "points": fit.points, "residual": fit.residual,
              "against": fit.against, "n_range": list(args.n)}
    _emit(args, result, {"modes_used": fit.points, "tail_bound": 0.0}, started)
    return EXIT_OK


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    which = FormulaId.parse(args.formula)
    geom = Geometry(args.dim, args.radius)
    coupling = _coupling(args, which)
    if args.steps < 0:
        raise UsageError("--steps must be >= 0")
    grid = np.linspace(args.lambda_from, args.lambda_to, args.steps) if args.steps else []
    cap = _mode_cap(args.mode_cap)
    plan_kwargs = {"mode_cap": cap, "abs_tol": args.abs_tol, "rel_tol": args.rel_tol,
                   "adaptive": cap == "auto"}
    points = sweep(which, geom, coupling, args.m, grid, plan_kwargs)
    columns = ["lambda", "value", "tail_bound", "modes_used", "converged", "error"]
    rows = []
    code = EXIT_OK
    for pt in points:
        if pt.result is None:
            rows.append({"lambda": pt.lam0, "value": None, "tail_bound": None,
                         "modes_used": None, "converged": False, "error": pt.error})
            severity = EXIT_NUMERIC if pt.error_type in ("NumericError", "SingularityError") else EXIT_USAGE
        else:
            r = pt.result
            rows.append({"lambda": pt.lam0, "value": r.value, "tail_bound": r.tail_bound,
                         "modes_used": r.modes_used, "converged": r.converged, "error": None})
            severity = EXIT_OK if r.converged else EXIT_NOT_CONVERGED
        code = max(code, severity)
    modes = sum(r["modes_used"] or 0 for r in rows)
    bound = max((r["tail_bound"] for r in rows if r["tail_bound"] is not None), default=0.0)
    if args.format == "json":
        _emit(args, {"formula": which.value, "rows": rows},
              {"modes_used": modes, "tail_bound": bound}, started)
    elif args.format == "csv":
        _emit(args, {}, {}, started, rows, columns)
    else:
        _emit(args, {"formula": which.value}, {"modes_used": modes, "tail_bound": bound},
              started, rows, columns)
    return code


COMMANDS = {"trace": cmd_trace, "verify": cmd_verify, "eigs": cmd_eigs,
            "decay": cmd_decay, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DomainError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except NumericError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except TraceError as exc:  # pragma: no cover - every subclass is mapped above
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
