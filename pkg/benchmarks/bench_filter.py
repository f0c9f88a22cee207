"""Compiled versus numpy filter-weight tables.

    python3 benchmarks/bench_filter.py [--sizes 1000 10000 100000] [--repeat 5]

Prints the best-of-``repeat`` wall time per table and the largest relative
difference between the two kernels.
"""

import argparse
import time

import numpy as np

from lsmlab.filter import KERNEL, FilterParams, weight_table


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 10000, 100000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--a", type=float, default=0.1)
    ap.add_argument("--T", type=float, default=4.0)
    args = ap.parse_args(argv)
    if KERNEL != "compiled":
        print("compiled kernel not built; timing the numpy fallback only")
    params = FilterParams(args.a, args.T)
    rng = np.random.default_rng(0)
    print(f"{'n':>8} {'numpy [s]':>12} {'compiled [s]':>13} {'speedup':>8} {'max rel diff':>13}")
    for n in args.sizes:
        E = rng.uniform(-10, 10, size=n)
        tn, fn = best_time(lambda: weight_table(E, params, kernel="numpy"), args.repeat)
        if KERNEL == "compiled":
            tc, fc = best_time(lambda: weight_table(E, params, kernel="compiled"), args.repeat)
            rel = float(np.max(np.abs(fc - fn) / np.maximum(np.abs(fn), 1e-300)))
            print(f"{n:>8} {tn:>12.4g} {tc:>13.4g} {tn / tc:>8.2f} {rel:>13.3g}")
        else:
            print(f"{n:>8} {tn:>12.4g} {'-':>13} {'-':>8} {'-':>13}")


if __name__ == "__main__":
    main()
