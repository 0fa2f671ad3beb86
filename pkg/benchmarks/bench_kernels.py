"""Compiled kernels against the numpy fallback on the runs that dominate
experiment time.  Both backends must produce identical fields; the script
checks that before reporting timings.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from loctime.excursion import ExcursionBudget, excursion_trace, lab_radii
from loctime.kernels import get_backend
from loctime.walker import CoverTime, WalkConfig, inverse_local_time, run_until, t_theta

CASES = {
    "inverse local time N=128 theta=1": lambda b: inverse_local_time(128, t_theta(128, 1.0), 0, 0, backend=b).occupation,
    "cover time N=64": lambda b: run_until(WalkConfig(N=64), CoverTime(), backend=b).occupation,
    "excursions N=64 budget=200": lambda b: excursion_trace(
        WalkConfig(N=64, start=(0, 0)), (32, 32), lab_radii(2, 16, 2, 64), ExcursionBudget(200),
        backend=b).level_counts,
}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        get_backend("compiled")
    except ImportError:
        raise SystemExit("compiled extension not built; run pip install -e . first")
    print(f"{'case':40s} {'compiled':>10s} {'python':>10s} {'speedup':>8s}")
    for name, case in CASES.items():
        tc, oc = best_of(lambda: case("compiled"), args.repeat)
        tp, op = best_of(lambda: case("python"), args.repeat)
        if not np.array_equal(oc, op):
            raise SystemExit(f"backends disagree on {name}")
        print(f"{name:40s} {tc * 1e3:9.1f}ms {tp * 1e3:9.1f}ms {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
