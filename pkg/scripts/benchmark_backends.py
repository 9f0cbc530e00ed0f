#!/usr/bin/env python3
"""Time the compiled kernels against the pure-Python fallback.

Run twice to compare the two backends:

    python scripts/benchmark_backends.py            # numba (if installed)
    VARLENRANK_NUMBA=0 python scripts/benchmark_backends.py

A numba-enabled invocation also times each chunk kernel's py_func as a
rough in-process reference; note that the nested per-sample kernels stay
compiled there, so the env-var run is the honest fallback number.
"""
import argparse
import pathlib
import sys
import time

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from varlenrank import _kernels
from varlenrank.core import AttractTable, RankingConfig, ScoreTable
from varlenrank.distribution import pair_arrays, sample_perm_chunks, stable_exp_scores
from varlenrank.exposure import build_exposure_table
from varlenrank.seeding import rng_for


def build(n_docs, slots, max_len, n_samples, seed=0):
    rng = rng_for(seed)
    config = RankingConfig(n_docs, slots, max_len)
    scores = ScoreTable(rng.normal(size=(n_docs, max_len)))
    attract = AttractTable(rng.uniform(size=(n_docs, max_len)))
    exposure = build_exposure_table("dcg", slots, max_len)
    ((_, perms),) = list(
        sample_perm_chunks(scores, config, n_samples, seed, chunk=n_samples)
    )
    return config, scores, attract, exposure, perms


def time_fn(fn, *args, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=50)
    parser.add_argument("--slots", type=int, default=30)
    parser.add_argument("--max-len", type=int, default=3)
    parser.add_argument("--samples", type=int, default=20000)
    parser.add_argument("--python-samples", type=int, default=500,
                        help="sample count for the slow pure-Python timing")
    args = parser.parse_args()

    print(f"backend: {_kernels.backend_name()}")
    config, scores, attract, exposure, perms = build(
        args.docs, args.slots, args.max_len, args.samples
    )
    docs, lens = pair_arrays(config)
    expm = stable_exp_scores(scores)

    rows = []
    for name in ("vlpl1_chunk", "vlpl2_chunk"):
        fn = getattr(_kernels, name)
        gs = np.zeros((config.num_docs, config.max_len))
        gss = np.zeros_like(gs)
        call = lambda p: fn(p, docs, lens, expm, attract.values, exposure.grid,
                            config.slots, config.max_len, gs, gss)
        call(perms[:64])  # JIT warm-up outside the timing
        fast = time_fn(call, perms) / args.samples

        py = _kernels.python_impl(fn)
        if py is fn:
            rows.append((name, fast, None))
            continue
        small = perms[: args.python_samples]
        py_call = lambda: py(small, docs, lens, expm, attract.values, exposure.grid,
                             config.slots, config.max_len, gs, gss)
        slow = time_fn(py_call, repeats=1) / small.shape[0]
        rows.append((name, fast, slow))

    print(f"instance: |D|={args.docs}, K={args.slots}, L={args.max_len}, "
          f"N={args.samples}")
    print(f"{'kernel':<14} {'per-sample':>12} {'py outer loop':>14} {'speedup':>9}")
    for name, fast, slow in rows:
        if slow is None:
            print(f"{name:<14} {fast * 1e6:>10.2f}us {'(same impl)':>14} {'-':>9}")
        else:
            print(f"{name:<14} {fast * 1e6:>10.2f}us {slow * 1e6:>12.2f}us "
                  f"{slow / fast:>8.1f}x")


if __name__ == "__main__":
    main()
