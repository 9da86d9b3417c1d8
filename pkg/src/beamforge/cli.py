"""Command-line interface: solve, sweep, gen, oracle.

Exit codes: 0 on a feasible solve, 2 when the beam cap made the instance
infeasible, 1 on usage or I/O errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from . import cc, da, io, oracle
from .instances import (DEFAULT_B_MAX, DEFAULT_C_MAX_MBPS, DEFAULT_R_MAX_KM,
                        generate)
from .scenario import check_feasibility
from .sweep import ExperimentSpec, run_sweep, write_sweep

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2

# System defaults; altitude and subsatellite point are metadata only.
DEFAULT_CONFIG = {
    "r_max": DEFAULT_R_MAX_KM,
    "c_max": DEFAULT_C_MAX_MBPS,
    "b_max": DEFAULT_B_MAX,
    "cc_repeats": 100,
    "satellite_altitude_km": 1110.0,
    "satellite_lat": 26.812309,
    "satellite_lon": -85.386382,
}

SOLVER_KEYS = ("alpha", "beta", "eta", "t_high", "t_min", "cooling_rate",
               "inner_iters", "inner_tol", "split_perturbation",
               "merge_threshold", "p_floor", "lb_damping")


def _load_config(path) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if path:
        cfg.update(json.loads(Path(path).read_text(encoding="utf-8")))
    return cfg


def _parse_cmax(value):
    if value is None:
        return math.inf
    if isinstance(value, str) and value.lower() in ("inf", "unbounded"):
        return math.inf
    return float(value)


def cmd_solve(args) -> int:
    config = _load_config(args.config)
    r_max = args.r_max if args.r_max is not None else config["r_max"]
    c_max = _parse_cmax(args.c_max if args.c_max is not None else config.get("c_max"))
    b_max = args.b_max if args.b_max is not None else config["b_max"]
    scenario = io.ingest(args.input, r_max=r_max, c_max=c_max, b_max=b_max,
                         seed=args.seed)

    start = time.perf_counter()
    if args.method == "cc":
        plan = cc.cc_best_of(scenario, runs=int(config["cc_repeats"]), seed=args.seed)
        report = check_feasibility(scenario, plan)
        feasible = report.coverage_ok
        at_cap = False
        trace_len = 0
    else:
        variant = {"da-cov": "coverage", "da-cap": "capacity", "da-lb": "load_balance"}[args.method]
        overrides = {k: config[k] for k in SOLVER_KEYS if k in config}
        cfg = da.SolverConfig(variant=variant, seed=args.seed, **overrides)
        result = da.solve(scenario, cfg)
        plan, feasible, at_cap = result.plan, result.feasible, result.at_beam_cap
        report = check_feasibility(scenario, plan)
        trace_len = len(result.trace)
    runtime = time.perf_counter() - start

    out_dir = args.out or "."
    io.write_plan(plan, scenario, out_dir, geojson=args.geojson, summary_extra={
        "method": args.method,
        "seed": args.seed,
        "feasible": feasible,
        "coverage_ok": report.coverage_ok,
        "capacity_ok": report.capacity_ok,
        "at_beam_cap": at_cap,
        "trace_length": trace_len,
        "runtime_s": runtime,
        "config": {k: (None if isinstance(v, float) and math.isinf(v) else v)
                   for k, v in config.items()},
    })
    print(f"{args.method}: {plan.num_beams} beams, "
          f"{'feasible' if feasible else 'INFEASIBLE'} "
          f"(max radius {report.max_radius_used:.3f} km, max load {report.max_load:.1f} Mbps)")
    if not feasible and at_cap:
        return EXIT_INFEASIBLE
    return EXIT_OK if feasible else EXIT_INFEASIBLE


def cmd_sweep(args) -> int:
    spec = ExperimentSpec.from_json(args.spec)
    result = run_sweep(spec)
    paths = write_sweep(result, args.out)
    for cell in result.cells:
        c_max = "inf" if math.isinf(cell.c_max) else f"{cell.c_max:g}"
        print(f"cell {cell.cell_index}: U={cell.u} r_max={cell.r_max:g} "
              f"c_max={c_max} -> mean beams {cell.mean_beams:.2f}")
    print(f"wrote {paths['cells']}, {paths['runs']}")
    return EXIT_OK


def cmd_gen(args) -> int:
    scenario = generate(args.u, args.extent, seed=args.seed)
    io.write_terminals(scenario, args.out)
    print(f"wrote {args.u} terminals to {args.out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    c_max = _parse_cmax(args.c_max)
    scenario = io.ingest(args.input, r_max=args.r_max, c_max=c_max,
                         b_max=DEFAULT_B_MAX, seed=0)
    plan = oracle.exact_min_cover(scenario, with_capacity=math.isfinite(c_max))
    print(json.dumps({
        "optimal_beams": plan.num_beams,
        "centers": [[float(x), float(y)] for x, y in plan.centers],
        "assignment": plan.assignment,
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamforge",
                                     description="Capacitated beam placement solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance from a terminal CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--method", required=True, choices=["da-cov", "da-cap", "da-lb", "cc"])
    p.add_argument("--r-max", type=float, default=None, help="beam radius, km")
    p.add_argument("--c-max", default=None, help="beam capacity, Mbps, or 'inf'")
    p.add_argument("--b-max", type=int, default=None, help="beam count cap")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--geojson", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run an experiment sweep from a spec file")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen", help="generate a synthetic terminal CSV")
    p.add_argument("--u", type=int, required=True)
    p.add_argument("--extent", type=float, required=True, help="square extent, km")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("oracle", help="exact optimum for a tiny instance")
    p.add_argument("--input", required=True)
    p.add_argument("--r-max", type=float, required=True)
    p.add_argument("--c-max", default=None)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (OSError, ValueError, io.IngestError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
