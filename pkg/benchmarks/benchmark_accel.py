"""Compare the numba backend against the pure-numpy fallback on the hot
kernels and on a short end-to-end chain.

Each case runs in a subprocess with COXKIT_NUMBA forced to "1" or "0" (the
backend is chosen at import time), so one invocation of this script exercises
both paths:

    python3 benchmarks/benchmark_accel.py
"""

import json
import os
import subprocess
import sys

CASES = ["kernel_sym", "kernel_cross", "trunc_normal", "constrained_gibbs",
         "rank1_update", "spatial_chain"]

WORKER = r"""
import json, os, sys, time
import numpy as np

case = sys.argv[1]
from coxkit import accel

def timeit(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best

rng = np.random.default_rng(0)
if case == "kernel_sym":
    x = rng.random((600, 2)) * 10
    accel.kernel_sym(x[:4], 1.0, 5.0, 1.5)  # warm the JIT
    dt = timeit(lambda: accel.kernel_sym(x, 1.0, 5.0, 1.5))
elif case == "kernel_cross":
    x = rng.random((600, 2)) * 10
    y = rng.random((400, 2)) * 10
    accel.kernel_cross(x[:4], y[:4], 1.0, 5.0, 1.5)
    dt = timeit(lambda: accel.kernel_cross(x, y, 1.0, 5.0, 1.5))
elif case == "trunc_normal":
    accel.trunc_std_normal(rng, -1.0, 2.0)
    def run():
        for _ in range(20000):
            accel.trunc_std_normal(rng, -1.0, 2.0)
    dt = timeit(run, repeat=2)
elif case == "constrained_gibbs":
    m = 120
    a = np.tril(rng.standard_normal((m, m)))
    np.fill_diagonal(a, np.abs(np.diag(a)) + 0.3)
    g = rng.standard_normal(m)
    u0 = accel.feasible_start(a, g)
    accel.constrained_gibbs_sweeps(rng, a, g, u0.copy(), 1)
    dt = timeit(lambda: accel.constrained_gibbs_sweeps(rng, a, g, u0.copy(), m),
                repeat=2)
elif case == "rank1_update":
    n = 1000
    mat = np.eye(n) * 2.0
    vec = rng.standard_normal(n)
    accel.rank1_update(mat[:4, :4], vec[:4], 0.1)
    def run():
        for _ in range(50):
            accel.rank1_update(mat, vec, 1e-6)
    dt = timeit(run, repeat=2)
elif case == "spatial_chain":
    import coxkit as ck
    from coxkit.mcmc_spatial import GibbsConfig
    region = ck.Region(((0.0, 10.0),))
    ev = region.sample(rng, 25)
    data = ck.SpatialData(region, ev)
    priors = ck.PriorSpec(
        ck.LambdaPrior.gamma(3.0, 1.0),
        (ck.ProcessPrior(ck.Param.fixed(0.0), ck.Param.fixed(1.0),
                         ck.Param.fixed(2.0), 1.5),),
    )
    ck.run_gibbs(data, priors, GibbsConfig(n_iter=3, seed=0))  # warm
    dt = timeit(lambda: ck.run_gibbs(data, priors,
                                     GibbsConfig(n_iter=60, seed=1)), repeat=1)
else:
    raise SystemExit(f"unknown case {case}")
print(json.dumps({"case": case, "backend": accel.BACKEND, "seconds": dt}))
"""


def run_case(case, backend_flag):
    env = dict(os.environ, COXKIT_NUMBA=backend_flag)
    out = subprocess.run(
        [sys.executable, "-c", WORKER, case],
        capture_output=True, text=True, env=env, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    print(f"{'case':>18s} {'numba [s]':>12s} {'numpy [s]':>12s} {'speedup':>9s}")
    for case in CASES:
        fast = run_case(case, "1")
        slow = run_case(case, "0")
        ratio = slow["seconds"] / fast["seconds"] if fast["seconds"] else float("nan")
        print(f"{case:>18s} {fast['seconds']:12.4f} {slow['seconds']:12.4f} "
              f"{ratio:8.1f}x")


if __name__ == "__main__":
    main()
