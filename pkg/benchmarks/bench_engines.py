"""Benchmark: numba sweep kernels vs the pure-numpy red-black twin.

Run:  python benchmarks/bench_engines.py
Both engines solve the same problems from the same cold start; the numpy
path is what SUBEQ_NUMBA=0 selects.  Expect one-time jit compilation cost
on the first numba call (cached on disk afterwards).
"""
import time

import numpy as np

from subeq import (
    FlatBox,
    GridFunction,
    ProblemSpec,
    RadialModel,
    SchemeParams,
    laplace,
    perron_dirichlet,
    solve_obstacle,
)
from subeq._kernels import NUMBA_ENABLED
from subeq.profiles import Profile


def bench(label, make_spec, engines=("numba", "numpy")):
    rows = []
    for eng in engines:
        if eng == "numba" and not NUMBA_ENABLED:
            rows.append((eng, float("nan"), 0, "numba unavailable"))
            continue
        spec = make_spec()
        spec.scheme = SchemeParams(init="constant", force_engine=eng,
                                   max_sweeps=2_000_000)
        t0 = time.perf_counter()
        if spec.obstacle is None:
            _, cert = perron_dirichlet(spec)
        else:
            _, cert = solve_obstacle(spec)
        rows.append((eng, time.perf_counter() - t0, cert.counts["sweeps"], ""))
    base = rows[0][1]
    print(f"\n{label}")
    for eng, dt, sweeps, note in rows:
        timing = "" if not np.isfinite(dt) else f"{dt:8.3f} s  {sweeps:7d} sweeps"
        ratio = "" if (not np.isfinite(dt) or dt == 0) else f"  x{dt / base:5.2f}"
        print(f"  {eng:8s}{timing}{ratio}  {note}")


def dirichlet_sinh():
    M = RadialModel.uniform(2, "sinh", 1.0, 10.0, 200)
    return ProblemSpec(laplace(Profile.linear(1.0), m=2), M,
                       {"inner": 0.0, "outer": -1.0})


def obstacle_box():
    M = FlatBox(1, [(0.0, 1.0)], 1 / 200)
    x = M.coords[:, 0]
    from subeq import hessian_branch
    return ProblemSpec(hessian_branch(1, Profile.linear(0.0), m=1), M,
                       {"side": lambda xx: xx**2},
                       obstacle=GridFunction(M, x**2))


if __name__ == "__main__":
    print(f"numba enabled: {NUMBA_ENABLED} (set SUBEQ_NUMBA=0 to force numpy everywhere)")
    # warm the jit cache so compile time does not pollute the first row
    if NUMBA_ENABLED:
        warm = dirichlet_sinh()
        warm.scheme = SchemeParams(max_sweeps=50_000)
        perron_dirichlet(warm)
    bench("Dirichlet, sinh model m=2, laplace f(r)=r, 200 nodes, cold start",
          dirichlet_sinh)
    bench("Obstacle, 1-D box, convexity member, g=x^2, 201 nodes, cold start",
          obstacle_box)
