"""Command-line interface.

Subcommands front the computation cores: ``geometry``, ``potential``,
``coefficient``, ``spectrum``, ``evolve``, ``pathint``, plus ``serve`` to
run the HTTP service.  Output is an aligned table by default or one flat
``key=value`` record per line with ``--format records`` (floats printed
with 17 significant digits).

Exit codes: 0 on success, 2 for configuration or usage errors, 3 for
numerical or domain failures.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .expressions import ParseError
from .geodesics import ChartError, GeodesicError
from .geometry import MetricEvaluationError
from .grid_ops import GridError, build_grid
from .jets import EvaluationError
from .metrics import MetricConfigError, MetricSpec, load_metric
from .ordering import parse_rule
from . import runs

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_CONFIG_ERRORS = (MetricConfigError, ParseError, GridError, ValueError)
_NUMERIC_ERRORS = (
    MetricEvaluationError,
    EvaluationError,
    ChartError,
    GeodesicError,
    ArithmeticError,
    np.linalg.LinAlgError,
)


class UsageError(ValueError):
    pass


def _parse_points(text: str, n: int) -> list:
    points = []
    for chunk in text.replace(";", " ").split():
        coords = [float(v) for v in chunk.split(",") if v != ""]
        if len(coords) != n:
            raise UsageError(
                f"point {chunk!r} has {len(coords)} coordinates, expected {n}"
            )
        points.append(coords)
    if not points:
        raise UsageError("no points given")
    return points


def _parse_grid(text: str, n: int) -> tuple:
    parts = text.lower().split("x")
    counts = tuple(int(p) for p in parts)
    if len(counts) == 1 and n > 1:
        counts = counts * n
    if len(counts) != n:
        raise UsageError(f"--grid {text!r} has {len(counts)} entries, expected {n}")
    return counts


def _parse_ranges(text: str | None, n: int):
    if not text:
        return None
    out = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            out.append(None)
            continue
        lo, _, hi = chunk.partition(":")
        out.append((float(lo), float(hi)))
    if len(out) == 1 and n > 1:
        out = out * n
    if len(out) != n:
        raise UsageError(f"--range {text!r} has {len(out)} entries, expected {n}")
    return out


def _parse_boundary(text: str | None, n: int):
    if not text:
        return None
    kinds = [k.strip() for k in text.split(",")]
    if len(kinds) == 1 and n > 1:
        kinds = kinds * n
    if len(kinds) != n:
        raise UsageError(f"--boundary {text!r} has {len(kinds)} entries, expected {n}")
    return tuple(kinds)


def _parse_rules(text: str) -> list:
    if text.strip().lower() == "all":
        return ["weyl", "rivier", "new"]
    # a rule may itself contain a comma (weight pair); split on ';'
    return [parse_rule(part) for part in text.split(";") if part.strip()]


def _fmt_value(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.17g}"
    return str(v)


def format_records(records: list, fmt: str) -> str:
    if fmt == "records":
        lines = []
        for rec in records:
            lines.append(" ".join(f"{k}={_fmt_value(v)}" for k, v in rec.items()))
        return "\n".join(lines)
    # aligned table over the union of keys, preserving first-seen order
    keys: list = []
    for rec in records:
        for k in rec:
            if k not in keys:
                keys.append(k)
    rows = [[_fmt_value(rec.get(k, "")) for k in keys] for rec in records]
    widths = [max(len(k), *(len(r[i]) for r in rows)) if rows else len(k)
              for i, k in enumerate(keys)]
    out = ["  ".join(k.ljust(w) for k, w in zip(keys, widths))]
    for r in rows:
        out.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(out)


def _add_common(p: argparse.ArgumentParser, grid: bool = False):
    p.add_argument("--metric", required=True,
                   help="preset name (e.g. sphere-2:1) or config file path")
    p.add_argument("--hbar", type=float, default=1.0)
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--format", choices=("table", "records"), default="table")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for any sampled quantities")
    if grid:
        p.add_argument("--grid", required=True, help="nodes per dimension, e.g. 64x128")
        p.add_argument("--range", dest="ranges", default=None,
                       help="explicit bounds lo:hi[,lo:hi] (needed for infinite charts)")
        p.add_argument("--boundary", default=None,
                       help="periodic|dirichlet|natural per dimension, comma separated")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="curvq",
        description="operator-ordering quantization laboratory on curved configuration spaces",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("geometry", help="metric, Christoffels, curvature at points")
    _add_common(p)
    p.add_argument("--points", required=True,
                   help='semicolon/space separated points, e.g. "1.0,0.5; 2.0,0.1"')

    p = sub.add_parser("potential", help="quantum potential breakdown at points")
    _add_common(p)
    p.add_argument("--points", required=True)
    p.add_argument("--rule", default="all",
                   help="weyl|rivier|new|wW,wR or 'all'; several with ';'")

    p = sub.add_parser("coefficient", help="curvature coefficient at normal origins")
    _add_common(p)
    p.add_argument("--points", required=True)
    p.add_argument("--rule", default="all")
    p.add_argument("--fd-step", type=float, default=0.02)

    p = sub.add_parser("spectrum", help="lowest eigenvalues of the Hamiltonian")
    _add_common(p, grid=True)
    p.add_argument("--rule", default="new")
    p.add_argument("--vq", choices=("rule", "none", "dewitt"), default="rule",
                   help="quantum potential: the rule's, none, or the R/6 curvature shift")
    p.add_argument("--count", type=int, default=9, help="number of eigenvalues")

    p = sub.add_parser("evolve", help="unitary evolution diagnostics")
    _add_common(p, grid=True)
    p.add_argument("--rule", default="new")
    p.add_argument("--vq", choices=("rule", "none", "dewitt"), default="rule")
    p.add_argument("--time", type=float, required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--psi0", choices=("gaussian", "ground"), default="gaussian")
    p.add_argument("--report-every", type=int, default=10)

    p = sub.add_parser("pathint", help="sliced-kernel convergence against evolution")
    _add_common(p, grid=True)
    p.add_argument("--rule", default="new")
    p.add_argument("--time", type=float, required=True)
    p.add_argument("--slices", required=True, help="comma list, e.g. 4,8,16,32")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return ap


def _grid_from_args(spec: MetricSpec, args) -> "object":
    counts = _parse_grid(args.grid, spec.n)
    ranges = _parse_ranges(args.ranges, spec.n)
    boundary = _parse_boundary(args.boundary, spec.n)
    return build_grid(spec, counts, boundary=boundary, ranges=ranges)


def _dispatch(args) -> list:
    spec = load_metric(args.metric)
    if args.command == "geometry":
        return runs.run_geometry(spec, _parse_points(args.points, spec.n))
    if args.command == "potential":
        return runs.run_potential(
            spec, _parse_rules(args.rule), _parse_points(args.points, spec.n),
            hbar=args.hbar, mass=args.mass,
        )
    if args.command == "coefficient":
        return runs.run_coefficient(
            spec, _parse_rules(args.rule), _parse_points(args.points, spec.n),
            fd_step=args.fd_step,
        )
    if args.command == "spectrum":
        grid = _grid_from_args(spec, args)
        return runs.run_spectrum(spec, grid, args.count, rule=args.rule,
                                 vq_mode=args.vq, hbar=args.hbar, mass=args.mass)
    if args.command == "evolve":
        grid = _grid_from_args(spec, args)
        return runs.run_evolve(spec, grid, args.rule, args.time, args.steps,
                               psi0=args.psi0, vq_mode=args.vq, hbar=args.hbar,
                               mass=args.mass, report_every=args.report_every)
    if args.command == "pathint":
        grid = _grid_from_args(spec, args)
        slice_counts = [int(s) for s in args.slices.split(",") if s.strip()]
        return runs.run_pathint(spec, grid, args.rule, args.time, slice_counts,
                                hbar=args.hbar, mass=args.mass)
    raise UsageError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    if args.command == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    try:
        records = _dispatch(args)
    except _NUMERIC_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except _CONFIG_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    print(format_records(records, args.format))
    return 0


if __name__ == "__main__":
    sys.exit(main())
