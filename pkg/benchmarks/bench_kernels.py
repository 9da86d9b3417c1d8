#!/usr/bin/env python3
"""Compare the numba and pure-numpy kernel backends.

Times the fixed-temperature inner loop on synthetic instances of several
sizes, then times a full solve, for whichever backends are importable. Run:

    python benchmarks/bench_kernels.py [--repeats N]

The backend is chosen at import time from BEAMFORGE_BACKEND, so this script
re-executes itself in a subprocess per backend rather than toggling in-process.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def bench_backend():
    """Run inside a subprocess with BEAMFORGE_BACKEND already set."""
    from beamforge import SolverConfig, generate, solve
    from beamforge import kernels

    results = {"backend": kernels.get_backend(), "inner": {}, "solve": {}}
    rng = np.random.default_rng(0)

    for u, m in ((50, 8), (200, 24), (1000, 64)):
        pos = rng.uniform(0, 100, size=(u, 2))
        pu = np.full(u, 1.0 / u)
        centers = rng.uniform(0, 100, size=(m, 2))
        # Warm-up (numba JIT compiles on first call).
        kernels.anneal_inner(pos, pu, centers, 1.0, 10.0, 10.0)
        times = []
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            kernels.anneal_inner(pos, pu, centers, 1.0, 10.0, 10.0)
            times.append(time.perf_counter() - t0)
        results["inner"][f"U={u},M={m}"] = min(times)

    for u in (50, 200):
        s = generate(u, 80.0, seed=7, r_max=8.0, b_max=64)
        solve(s, SolverConfig(seed=7))
        t0 = time.perf_counter()
        solve(s, SolverConfig(seed=7))
        results["solve"][f"U={u}"] = time.perf_counter() - t0

    print(json.dumps(results))


def main():
    rows = []
    for backend in ("numpy", "numba"):
        env = dict(os.environ, BEAMFORGE_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, __file__, "--worker", "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            print(f"{backend}: failed\n{proc.stderr}", file=sys.stderr)
            continue
        rows.append(json.loads(proc.stdout.strip().splitlines()[-1]))

    if not rows:
        sys.exit(1)
    keys = list(rows[0]["inner"]) + list(rows[0]["solve"])
    header = f"{'case':>16}" + "".join(f"{r['backend']:>12}" for r in rows)
    print(header)
    print("-" * len(header))
    for k in keys:
        section = "inner" if k in rows[0]["inner"] else "solve"
        cells = "".join(f"{r[section][k] * 1e3:>10.2f}ms" for r in rows)
        label = k if section == "inner" else f"solve {k}"
        print(f"{label:>16}{cells}")
    if len(rows) == 2:
        speedups = [rows[0]["inner"][k] / rows[1]["inner"][k]
                    for k in rows[0]["inner"]]
        print(f"\ninner-loop speedup ({rows[1]['backend']} over "
              f"{rows[0]['backend']}): {min(speedups):.1f}x - {max(speedups):.1f}x")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.worker:
        bench_backend()
    else:
        main()
