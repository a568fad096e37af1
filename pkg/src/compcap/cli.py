"""Command-line front end: ``compcap <command> [options]``."""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import sys
from typing import Any, Sequence

import numpy as np

from .channels import parse_builtin, resolve_family
from .competitive import concat_schedule
from .errors import CompCapError, ParameterOutOfRange
from .optimize import (
    SearchConfig,
    compound_capacity,
    prop1_cr_via_regret,
    prop1_regret_via_cr,
    single_dist_bound,
    single_dist_regret,
    solve_cr,
    solve_regret,
    solve_weighted_cr,
    solve_weighted_regret,
    split_sweep,
    sweep,
    write_csv,
)
from .simulate import SimConfig, estimate

log = logging.getLogger("compcap")

COMMANDS = ("capacity", "cr", "regret", "weighted-cr", "weighted-regret", "reduce", "simulate", "sweep", "concat")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _floats(text: str, flag: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ParameterOutOfRange(f"{flag} expects comma-separated numbers, got {text!r}") from None


def parse_param_grid(text: str) -> dict[str, list[float]]:
    """``z=0.1:0.9:0.1;s=0.2,0.4`` -> {"z": [...], "s": [...]} (ranges are inclusive)."""
    grid: dict[str, list[float]] = {}
    for part in filter(None, (p.strip() for p in text.split(";"))):
        name, sep, spec = part.partition("=")
        if not sep:
            raise ParameterOutOfRange(f"bad grid entry {part!r}; expected name=values")
        if ":" in spec:
            try:
                lo, hi, step = (float(v) for v in spec.split(":"))
            except ValueError:
                raise ParameterOutOfRange(f"bad range {spec!r}; expected lo:hi:step") from None
            if step <= 0 or hi < lo:
                raise ParameterOutOfRange(f"bad range {spec!r}")
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            grid[name.strip()] = [round(lo + i * step, 12) for i in range(n)]
        else:
            grid[name.strip()] = _floats(spec, "--param-grid")
    if not grid:
        raise ParameterOutOfRange("--param-grid is empty")
    return grid


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="compcap", description=__doc__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--family", help="builtin:<name>?<params> or path to a family JSON file")
    parser.add_argument("--format", choices=("json", "csv", "text"), default="json")
    parser.add_argument("--out", help="write the report here instead of stdout")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--grid", type=float, default=0.01, help="simplex grid step")
    parser.add_argument("--starts", type=int, default=32, help="random starts for the local search")
    parser.add_argument("--tol", type=float, default=1e-6, help="local search step tolerance")
    parser.add_argument("--weights", help="comma-separated per-state weights")
    parser.add_argument("--rates", help="comma-separated rates (concat)")
    parser.add_argument("--k", type=int, default=12, help="message bits (simulate, concat)")
    parser.add_argument("--delta", type=float, default=0.25)
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--channel", type=int, help="true channel for simulate (default: all)")
    parser.add_argument("--metric", help="solver variant or comma-separated sweep metrics")
    parser.add_argument("--param-grid", help="sweep grid, e.g. 'z=0.1:0.9:0.1;s=0.1:0.9:0.1'")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args: argparse.Namespace) -> SearchConfig:
    return SearchConfig(grid_step=args.grid, starts=args.starts, step_tol=args.tol, seed=args.seed)


def _need(args: argparse.Namespace, name: str) -> Any:
    value = getattr(args, name)
    if value is None:
        raise ParameterOutOfRange(f"--{name.replace('_', '-')} is required for {args.command}")
    return value


def _capacity(args: argparse.Namespace) -> dict[str, Any]:
    fam = resolve_family(_need(args, "family"))
    return {
        "command": "capacity",
        "seed": args.seed,
        "family": fam.name,
        "channels": [
            {"name": ch.name, "capacity": c, "distribution": list(p)}
            for ch, c, p in zip(fam.channels, fam.capacities, fam.capacity_dists)
        ],
    }


def _solve(args: argparse.Namespace) -> dict[str, Any]:
    fam = resolve_family(_need(args, "family"))
    cfg = _config(args)
    metric = args.metric or "opt"
    if args.command == "cr":
        solvers = {"opt": solve_cr, "single": single_dist_bound, "compound": compound_capacity}
    elif args.command == "regret":
        solvers = {"opt": solve_regret, "single": single_dist_regret}
    elif args.command == "weighted-cr":
        w = _floats(_need(args, "weights"), "--weights")
        solvers = {"opt": lambda f, c: solve_weighted_cr(f, w, c)}
    else:
        w = _floats(_need(args, "weights"), "--weights")
        solvers = {"opt": lambda f, c: solve_weighted_regret(f, w, c)}
    if metric not in solvers:
        raise ParameterOutOfRange(f"--metric for {args.command} must be one of {', '.join(solvers)}")
    report = solvers[metric](fam, cfg).to_dict()
    report["command"] = args.command
    report["family"] = fam.name
    return report


def _reduce(args: argparse.Namespace) -> dict[str, Any]:
    fam = resolve_family(_need(args, "family"))
    w = _floats(_need(args, "weights"), "--weights")
    metric = args.metric or "cr"
    if metric == "cr":
        res = prop1_cr_via_regret(fam, w, _config(args))
    elif metric == "regret":
        res = prop1_regret_via_cr(fam, w, _config(args))
    else:
        raise ParameterOutOfRange("--metric for reduce must be cr or regret")
    return {"command": "reduce", "metric": metric, "family": fam.name, **res.to_dict()}


def _simulate(args: argparse.Namespace):
    fam = resolve_family(_need(args, "family"))
    cfg = _config(args)
    metric = args.metric or "cr"
    if metric not in ("cr", "regret"):
        raise ParameterOutOfRange("--metric for simulate must be cr or regret")
    rep = (solve_cr if metric == "cr" else solve_regret)(fam, cfg)
    sim = SimConfig(fam, rep.schedule, k=args.k, delta=args.delta, trials=args.trials,
                    seed=args.seed, true_channel=args.channel)
    return estimate(sim)


def _sweep(args: argparse.Namespace) -> tuple[list[dict[str, Any]], list[str]]:
    family = _need(args, "family")
    grid = parse_param_grid(_need(args, "param_grid"))
    metrics = (args.metric or "cr_lb,cr_opt").split(",")
    if metrics == ["split"]:
        if list(grid) != ["p"]:
            raise ParameterOutOfRange("split sweeps take a single grid axis named p")
        return split_sweep(resolve_family(family), grid["p"]), ["p"]
    if not family.startswith("builtin:"):
        raise ParameterOutOfRange("parameter sweeps need a builtin: family")
    name, fixed = parse_builtin(family)
    full = {k: [float(v)] for k, v in fixed.items()}
    full.update(grid)
    rows = sweep(name, full, metrics, _config(args), workers=args.workers)
    return rows, list(full)


def _concat(args: argparse.Namespace) -> dict[str, Any]:
    rates = [v.strip() for v in _need(args, "rates").split(",") if v.strip()]
    try:
        sched = concat_schedule(rates, args.k)
    except ValueError as exc:
        if isinstance(exc, CompCapError):
            raise
        raise ParameterOutOfRange(f"--rates: {exc}") from None
    return {"command": "concat", "seed": args.seed, "k": args.k, "rates": rates, **sched.to_dict()}


def _text(report: dict[str, Any]) -> str:
    lines = []
    for key, value in report.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(_jsonable(value))
        lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"


def run(argv: Sequence[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    buf = io.StringIO()
    try:
        if args.command == "capacity":
            report: Any = _capacity(args)
        elif args.command in ("cr", "regret", "weighted-cr", "weighted-regret"):
            report = _solve(args)
        elif args.command == "reduce":
            report = _reduce(args)
        elif args.command == "simulate":
            sim = _simulate(args)
            if args.format == "csv":
                sim.write_trials_csv(buf)
                report = None
            else:
                report = {"command": "simulate", **sim.to_dict()}
        elif args.command == "sweep":
            rows, params = _sweep(args)
            if args.format == "json":
                report = {"command": "sweep", "seed": args.seed, "rows": rows}
            else:
                write_csv(rows, buf, params)
                report = None
        else:
            report = _concat(args)
        if report is not None:
            if args.format == "text":
                buf.write(_text(report))
            elif args.format == "csv":
                write_csv([_flat(report)], buf)
            else:
                buf.write(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
        else:
            stdout.write(buf.getvalue())
    except (CompCapError, OSError, json.JSONDecodeError) as exc:
        print(f"compcap: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


def _flat(report: dict[str, Any]) -> dict[str, Any]:
    return {k: v if isinstance(v, (int, float, str)) else json.dumps(_jsonable(v)) for k, v in report.items()}


def main(argv: Sequence[str] | None = None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
