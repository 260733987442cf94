"""Benchmark the compiled Hamming scan against the pure-numpy fallback.

Usage: python3 benchmarks/bench_hamming.py [--n-db N] [--n-query N] [--bits K ...]
"""

import argparse
import time

import numpy as np

import xmhash.retrieval as rt
from xmhash.retrieval import pack_codes, pairwise_distances


def run_backend(queries, db, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        pairwise_distances(queries, db)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-db", type=int, default=200_000)
    ap.add_argument("--n-query", type=int, default=200)
    ap.add_argument("--bits", type=int, nargs="+", default=[16, 32, 64, 128])
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    if rt._hamming is None:
        print("compiled extension not available; nothing to compare")
        return

    rng = np.random.default_rng(0)
    print(f"database={args.n_db} queries={args.n_query} (best of {args.repeats})")
    print(f"{'bits':>5} {'compiled':>12} {'numpy':>12} {'speedup':>8}")
    for k in args.bits:
        db = pack_codes(np.where(rng.random((k, args.n_db)) < 0.5, -1.0, 1.0))
        q = pack_codes(np.where(rng.random((k, args.n_query)) < 0.5, -1.0, 1.0))
        fast = run_backend(q, db, args.repeats)
        saved, rt._hamming = rt._hamming, None
        try:
            slow = run_backend(q, db, args.repeats)
        finally:
            rt._hamming = saved
        print(f"{k:>5} {fast * 1e3:>10.1f}ms {slow * 1e3:>10.1f}ms {slow / fast:>7.1f}x")


if __name__ == "__main__":
    main()
