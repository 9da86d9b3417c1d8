"""Experiment sweeps over (U, r_max, c_max) cells with matched instances."""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cc, da
from .instances import DEFAULT_B_MAX, DEFAULT_DEMAND_RANGE, generate
from .scenario import check_feasibility

METHODS = ("da-cov", "da-cap", "da-lb", "cc")

_METHOD_VARIANT = {"da-cov": "coverage", "da-cap": "capacity", "da-lb": "load_balance"}


@dataclass
class ExperimentSpec:
    method: str
    u_values: list[int]
    r_max_values: list[float]
    c_max_values: list[float]          # math.inf for unbounded
    runs_per_cell: int = 10
    cc_repeats: int = 100
    demand_range: tuple[float, float] = DEFAULT_DEMAND_RANGE
    base_seed: int = 0
    extent_km: float = 100.0
    b_max: int = DEFAULT_B_MAX
    solver: dict = field(default_factory=dict)  # SolverConfig overrides

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not (self.u_values and self.r_max_values and self.c_max_values):
            raise ValueError("u_values, r_max_values, c_max_values must be nonempty")
        if self.runs_per_cell < 1:
            raise ValueError("runs_per_cell must be >= 1")
        lo, hi = self.demand_range
        if not (0 < lo <= hi):
            raise ValueError("demand range must satisfy 0 < min <= max")

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if "c_max_values" in raw:
            raw["c_max_values"] = [
                math.inf if v in (None, "inf", "unbounded") else float(v)
                for v in raw["c_max_values"]
            ]
        if "demand_range" in raw:
            raw["demand_range"] = tuple(raw["demand_range"])
        return cls(**raw)

    def cells(self):
        idx = 0
        for u in self.u_values:
            for r_max in self.r_max_values:
                for c_max in self.c_max_values:
                    yield idx, u, r_max, c_max
                    idx += 1


@dataclass
class RunRecord:
    cell_index: int
    run_index: int
    method: str
    u: int
    r_max: float
    c_max: float
    seed: int
    num_beams: int
    feasible: bool
    at_beam_cap: bool
    runtime_s: float
    load_std: float


@dataclass
class CellRecord:
    cell_index: int
    method: str
    u: int
    r_max: float
    c_max: float
    mean_beams: float
    std_beams: float
    mean_runtime_s: float
    beam_counts: list[int]
    load_stds: list[float]


@dataclass
class SweepResult:
    spec: ExperimentSpec
    cells: list[CellRecord]
    runs: list[RunRecord]


def instance_seed(base_seed: int, cell_index: int, run_index: int) -> int:
    """Derive a run seed so every method sees identical instances per cell/run."""
    return (base_seed ^ (cell_index << 20) ^ run_index) & 0x7FFFFFFF


def run_one(spec: ExperimentSpec, cell_index: int, run_index: int,
            u: int, r_max: float, c_max: float) -> RunRecord:
    seed = instance_seed(spec.base_seed, cell_index, run_index)
    scenario = generate(u, spec.extent_km, spec.demand_range, seed=seed,
                        r_max=r_max, c_max=c_max, b_max=spec.b_max)
    start = time.perf_counter()
    if spec.method == "cc":
        plan = cc.cc_best_of(scenario, runs=spec.cc_repeats, seed=seed)
        feasible = check_feasibility(scenario, plan).coverage_ok
        at_cap = False
    else:
        cfg = da.SolverConfig(variant=_METHOD_VARIANT[spec.method], seed=seed,
                              **spec.solver)
        result = da.solve(scenario, cfg)
        plan = result.plan
        feasible = result.feasible
        at_cap = result.at_beam_cap
    runtime = time.perf_counter() - start
    profile = da.load_profile(plan, scenario)
    return RunRecord(
        cell_index=cell_index, run_index=run_index, method=spec.method,
        u=u, r_max=r_max, c_max=c_max, seed=seed,
        num_beams=plan.num_beams, feasible=feasible, at_beam_cap=at_cap,
        runtime_s=runtime, load_std=float(np.std(profile)),
    )


def _run_star(args):
    return run_one(*args)


def run_sweep(spec: ExperimentSpec) -> SweepResult:
    """Run every cell; records are keyed by (cell, run) so aggregation is
    order-independent regardless of worker scheduling."""
    tasks = [(spec, ci, ri, u, r, c)
             for ci, u, r, c in spec.cells()
             for ri in range(spec.runs_per_cell)]
    workers = int(os.environ.get("BEAMFORGE_THREADS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_star, tasks))
    else:
        runs = [run_one(*t) for t in tasks]
    runs.sort(key=lambda r: (r.cell_index, r.run_index))

    cells = []
    for ci, u, r_max, c_max in spec.cells():
        cell_runs = [r for r in runs if r.cell_index == ci]
        counts = [r.num_beams for r in cell_runs]
        cells.append(CellRecord(
            cell_index=ci, method=spec.method, u=u, r_max=r_max, c_max=c_max,
            mean_beams=float(np.mean(counts)), std_beams=float(np.std(counts)),
            mean_runtime_s=float(np.mean([r.runtime_s for r in cell_runs])),
            beam_counts=counts, load_stds=[r.load_std for r in cell_runs],
        ))
    return SweepResult(spec=spec, cells=cells, runs=runs)


def _fmt_cmax(c_max: float) -> str:
    return "inf" if math.isinf(c_max) else repr(float(c_max))


def write_sweep(result: SweepResult, out_dir) -> dict:
    """Emit cells.csv (one row per cell), runs.csv (long format), summary.json.

    The CSVs are byte-identical across repeated runs of the same spec, so
    wall-clock timings (informational only) go to timings.json instead.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    cells_path = out / "cells.csv"
    with cells_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_index", "method", "u", "r_max_km", "c_max_mbps",
                         "mean_beams", "std_beams"])
        for c in result.cells:
            writer.writerow([c.cell_index, c.method, c.u, repr(float(c.r_max)),
                             _fmt_cmax(c.c_max), repr(c.mean_beams), repr(c.std_beams)])
    paths["cells"] = cells_path

    runs_path = out / "runs.csv"
    with runs_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_index", "run_index", "method", "u", "r_max_km",
                         "c_max_mbps", "seed", "num_beams", "feasible",
                         "at_beam_cap", "load_std"])
        for r in result.runs:
            writer.writerow([r.cell_index, r.run_index, r.method, r.u,
                             repr(float(r.r_max)), _fmt_cmax(r.c_max), r.seed,
                             r.num_beams, int(r.feasible), int(r.at_beam_cap),
                             repr(r.load_std)])
    paths["runs"] = runs_path

    timings_path = out / "timings.json"
    timings_path.write_text(json.dumps({
        "per_cell_mean_runtime_s": {str(c.cell_index): c.mean_runtime_s for c in result.cells},
        "per_run_runtime_s": {f"{r.cell_index}/{r.run_index}": r.runtime_s for r in result.runs},
    }, indent=2) + "\n", encoding="utf-8")
    paths["timings"] = timings_path

    spec = result.spec
    summary = {
        "method": spec.method,
        "u_values": spec.u_values,
        "r_max_values": spec.r_max_values,
        "c_max_values": [None if math.isinf(c) else c for c in spec.c_max_values],
        "runs_per_cell": spec.runs_per_cell,
        "cc_repeats": spec.cc_repeats,
        "demand_range": list(spec.demand_range),
        "base_seed": spec.base_seed,
        "extent_km": spec.extent_km,
        "b_max": spec.b_max,
        "num_cells": len(result.cells),
        "num_runs": len(result.runs),
        "all_feasible": all(r.feasible for r in result.runs),
    }
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    paths["summary"] = summary_path
    return paths
