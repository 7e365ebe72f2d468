#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the two hot loops on realistic shapes: a two-mode Fock basis at the
cutoff a T=40 convergence run needs, and coherent-amplitude batches over
its full dimension. Run as

    python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from gibbslab import build_fock_basis
from gibbslab.kernels import _ref

try:
    from gibbslab.kernels import _fast
except ImportError:
    _fast = None


def timeit(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true",
                        help="small shapes (used by the test suite)")
    args = parser.parse_args()

    if args.quick:
        fb = build_fock_basis(2, 30)
        n_samples = 200
    else:
        fb = build_fock_basis(2, 197)
        n_samples = 2000

    rng = np.random.default_rng(0)
    vs = rng.standard_normal((n_samples, fb.K)) \
        + 1j * rng.standard_normal((n_samples, fb.K))
    W = rng.uniform(0.2, 1.0, (fb.K,) * 4)
    W = W + W.transpose(2, 3, 0, 1)
    W = W + W.transpose(1, 0, 3, 2)

    print(f"fock dim {fb.dim}, {n_samples} amplitude rows, K={fb.K}")
    rows = []
    for name, fn_args in [
        ("occupation_products", (vs, fb.occupations)),
        ("two_body_coo", (fb.occupations, fb.table, fb.strides, W)),
    ]:
        t_ref = timeit(getattr(_ref, name), *fn_args)
        if _fast is not None:
            t_fast = timeit(getattr(_fast, name), *fn_args)
            rows.append((name, t_ref, t_fast, t_ref / t_fast))
        else:
            rows.append((name, t_ref, None, None))

    print(f"{'kernel':<22} {'numpy [s]':>12} {'cython [s]':>12} {'speedup':>9}")
    for name, t_ref, t_fast, speedup in rows:
        if t_fast is None:
            print(f"{name:<22} {t_ref:>12.5f} {'(not built)':>12} {'-':>9}")
        else:
            print(f"{name:<22} {t_ref:>12.5f} {t_fast:>12.5f} {speedup:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
