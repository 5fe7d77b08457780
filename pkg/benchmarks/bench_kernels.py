"""Compiled kernels versus the plain numpy fallback.

Runs the same timings twice in fresh interpreters, once normally and once
with TEMPLEBP_DISABLE_NUMBA=1, and prints a comparison table.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(func, repeat):
    func()  # warm-up (and compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        func()
        times.append(time.perf_counter() - t0)
    return min(times)


def worker(repeat):
    from templebp import _accel, bp, harness
    from templebp.integrator import Solver
    from templebp.mesh import Boundary
    from templebp.weno import weno5_fluxes

    case = harness.get_case("T1")
    grid, state = case.initial(2000)
    bc = Boundary("outflow")
    solver = Solver(case.model, grid, bc)
    Up, xp, boxes = solver.prepare(state)
    phi, k, v = case.model.primitive_from_conserved(*Up)
    G = case.model.curvilinear_flux(phi, phi * k, v, v)
    speed = np.abs(v) + 1.0

    # a step-3 workload: every cell's far corner breaks v_max
    rng = np.random.default_rng(0)
    n = 2000
    A = case.model.conserved_from_primitive(rng.uniform(0.2, 0.8, n), rng.uniform(0.3, 0.5, n))
    vmax = case.model.primitive_from_conserved(*A).v + 1e-3
    Bm = np.vstack([np.zeros(n), np.zeros(n), np.full(n, 0.3)])
    Bp = Bm.copy()
    ones = np.ones(n)

    results = {
        "numba": _accel.HAS_NUMBA,
        "weno5_fluxes N=2000": _best(lambda: weno5_fluxes(Up, G, speed), repeat),
        "limiter step 3 N=2000": _best(
            lambda: bp.step3(case.model.params, A, Bm, Bp, vmax, ones, ones, False), repeat),
        "one RK3 step N=2000": _best(lambda: solver.step(state, 1.0), repeat),
        "T1 N=500 to t=1": _best(lambda: harness.run_case("T1", 500), max(1, repeat // 5)),
    }
    print(json.dumps(results))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the results here")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        worker(args.repeat)
        return 0

    runs = {}
    for label, extra in (("numba", {}), ("numpy", {"TEMPLEBP_DISABLE_NUMBA": "1"})):
        env = dict(os.environ, **extra)
        out = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(args.repeat)],
                             env=env, check=True, capture_output=True, text=True).stdout
        runs[label] = json.loads(out.strip().splitlines()[-1])
    if not runs["numba"].pop("numba"):
        print("warning: numba is not importable, both columns use the fallback")
    runs["numpy"].pop("numba")

    width = max(map(len, runs["numba"]))
    print(f"{'kernel':<{width}}  {'numba [s]':>10}  {'numpy [s]':>10}  {'speed-up':>8}")
    for name, t_fast in runs["numba"].items():
        t_slow = runs["numpy"][name]
        print(f"{name:<{width}}  {t_fast:10.4g}  {t_slow:10.4g}  {t_slow / t_fast:8.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(runs, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
