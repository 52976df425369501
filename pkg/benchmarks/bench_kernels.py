"""Compare the numba kernels with their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N] [--grid-res R]
"""

import argparse
import time

import numpy as np

from rtlc import _kernels
from rtlc.acc import AccParams


def best_of(fn, repeat):
    fn()  # warm-up (includes compilation for the numba path)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--grid-res", type=int, default=2000)
    args = ap.parse_args(argv)

    p = AccParams()
    rk4_args = (24.0, 90.0, 1000.0, 0.01, 1000, p.v0, p.mass, p.f0, p.f1, p.f2)

    rng = np.random.default_rng(0)
    L = rng.normal(size=(2, 2))
    quad = L @ L.T + 0.1 * np.eye(2)
    lin = rng.normal(size=2)
    rows_a = rng.normal(size=(3, 2))
    rows_b = rng.uniform(0.0, 1.0, size=3)
    lo, hi = -np.ones(2), np.ones(2)
    scan_args = (quad, lin, 0.0, rows_a, rows_b, lo, hi, args.grid_res, 1e-8)

    cases = [
        ("rk4_acc (1000 substeps)", _kernels.rk4_acc_numba, _kernels.rk4_acc_python, rk4_args),
        (f"grid_qp_scan ({args.grid_res}^2 grid)", _kernels.grid_qp_scan_numba,
         _kernels.grid_qp_scan_python, scan_args),
    ]
    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; both columns time the numpy path")
    print(f"{'kernel':<30s} {'numba (s)':>12s} {'numpy (s)':>12s} {'speedup':>9s}")
    for name, fast, slow, fargs in cases:
        t_fast = best_of(lambda: fast(*fargs), args.repeat)
        t_slow = best_of(lambda: slow(*fargs), max(1, args.repeat // 2))
        print(f"{name:<30s} {t_fast:>12.3e} {t_slow:>12.3e} {t_slow / t_fast:>8.1f}x")


if __name__ == "__main__":
    main()
