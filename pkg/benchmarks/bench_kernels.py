"""Compare the compiled and numpy neighbour-count kernels used by the TC estimator.

    python benchmarks/bench_kernels.py [--sizes 1000 2000 5000] [--dim 8] [--repeats 3]
"""
import argparse
import time

import numpy as np

from rica import _ksg_py

try:
    from rica import _ksg_ext
except ImportError:
    _ksg_ext = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 2000, 5000])
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    if _ksg_ext is None:
        print("compiled extension not built; only the numpy path is timed")
    rng = np.random.default_rng(0)
    print(f"{'N':>7} {'numpy [s]':>10} {'compiled [s]':>13} {'speedup':>8} {'identical':>9}")
    for N in args.sizes:
        X = rng.standard_normal((N, args.dim))
        t_py, (e_py, c_py) = best_of(lambda: _ksg_py.ksg_counts(X, args.k), args.repeats)
        if _ksg_ext is None:
            print(f"{N:>7} {t_py:>10.3f} {'-':>13} {'-':>8} {'-':>9}")
            continue
        t_c, (e_c, c_c) = best_of(lambda: _ksg_ext.ksg_counts(X, args.k), args.repeats)
        same = np.array_equal(e_py, e_c) and np.array_equal(c_py, c_c)
        print(f"{N:>7} {t_py:>10.3f} {t_c:>13.3f} {t_py / t_c:>7.1f}x {str(same):>9}")


if __name__ == "__main__":
    main()
