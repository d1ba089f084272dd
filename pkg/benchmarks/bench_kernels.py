#!/usr/bin/env python3
"""Time the jitted kernels against their fallback implementations.

Run:  python benchmarks/bench_kernels.py [--repeat N]

Covers the three hot loops: the span-identification DP, the sparse logistic
SGD epoch, and window feature-index mixing.  The jitted column requires
numba (do not set SENTID_NO_NUMBA when running this script).
"""

import argparse
import time

import numpy as np

from sentid import _kernels
from sentid._kernels import (
    _dp_decode_impl,
    _sgd_rows_numpy,
    _window_indices_numpy,
)


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_dp(n, repeat):
    rng = np.random.default_rng(0)
    p_bos, p_eos = rng.random(n), rng.random(n)
    lb1, lb0 = np.log(np.maximum(p_bos, 1e-12)), np.log(np.maximum(1 - p_bos, 1e-12))
    le1, le0 = np.log(np.maximum(p_eos, 1e-12)), np.log(np.maximum(1 - p_eos, 1e-12))
    ok = np.ones(n, np.uint8)
    args = (lb1, lb0, le1, le0, ok, ok)
    _kernels.dp_decode(*args)  # compile outside the timer
    jit = timeit(lambda: _kernels.dp_decode(*args), repeat)
    py = timeit(lambda: _dp_decode_impl(*args), repeat)
    return jit, py


def _random_csr(rng, nrows, feats_per_row, dim):
    indptr = np.arange(0, (nrows + 1) * feats_per_row, feats_per_row, dtype=np.int64)
    indices = rng.integers(0, dim, nrows * feats_per_row).astype(np.int64)
    return indices, indptr


def bench_sgd(nrows, repeat):
    rng = np.random.default_rng(1)
    dim = 2**18
    indices, indptr = _random_csr(rng, nrows, 200, dim)
    targets = rng.integers(0, 2, nrows).astype(np.float64)
    w = np.zeros(dim + 1)
    _kernels.sgd_rows(w, indices, indptr, targets, 0.1)
    jit = timeit(lambda: _kernels.sgd_rows(w, indices, indptr, targets, 0.1), repeat)
    py = timeit(lambda: _sgd_rows_numpy(w, indices, indptr, targets, 0.1), repeat)
    return jit, py


def bench_window(n_tokens, repeat):
    rng = np.random.default_rng(2)
    feats = 60
    indptr = np.arange(0, (n_tokens + 1) * feats, feats, dtype=np.int64)
    hashes = rng.integers(0, 2**32, n_tokens * feats, dtype=np.uint64)
    mask = np.uint64(2**18 - 1)
    pad = np.uint64(99)
    _kernels.window_indices(hashes, indptr, n_tokens, -5, 5, mask, pad)
    jit = timeit(lambda: _kernels.window_indices(hashes, indptr, n_tokens, -5, 5, mask, pad), repeat)
    py = timeit(lambda: _window_indices_numpy(hashes, indptr, n_tokens, -5, 5, mask, pad), repeat)
    return jit, py


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not _kernels.using_numba():
        raise SystemExit("numba path inactive (SENTID_NO_NUMBA set?); nothing to compare")

    rows = []
    for n in (1_000, 100_000):
        jit, py = bench_dp(n, args.repeat)
        rows.append((f"dp_decode n={n}", jit, py))
    for nrows in (1_000, 10_000):
        jit, py = bench_sgd(nrows, args.repeat)
        rows.append((f"sgd_rows rows={nrows}", jit, py))
    for n in (1_000, 10_000):
        jit, py = bench_window(n, args.repeat)
        rows.append((f"window_indices tokens={n}", jit, py))

    print(f"{'kernel':<28}{'jitted':>12}{'fallback':>12}{'speedup':>9}")
    for name, jit, py in rows:
        print(f"{name:<28}{jit * 1e3:>10.2f}ms{py * 1e3:>10.2f}ms{py / jit:>8.1f}x")


if __name__ == "__main__":
    main()
