#!/usr/bin/env python3
"""Latency benchmark for the suffix tree: per-op time should grow like
log N, i.e. doubling N from 2^14 to 2^15 should cost well under 1.3x.

Run: python3 scripts/bench_tree.py
"""
import time

import numpy as np

from cba.tree import SuffixProductTree


def bench(n, n_ops=200_000, seed=0):
    rng = np.random.default_rng(seed)
    tree = SuffixProductTree(np.ones(n))
    queries = rng.integers(n, size=n_ops)
    factors = np.exp(rng.uniform(-0.1, 0.1, size=n_ops))
    kinds = rng.random(n_ops) < 0.5
    t0 = time.perf_counter()
    for q, u, is_query in zip(queries.tolist(), factors.tolist(),
                              kinds.tolist()):
        if is_query:
            tree.query(q)
        else:
            tree.update(q, u)
    return (time.perf_counter() - t0) / n_ops


def main():
    results = {}
    for exp in (14, 15):
        n = 2 ** exp
        per_op = min(bench(n, seed=rep) for rep in range(3))
        results[n] = per_op
        print(f"N = 2^{exp} = {n}: {per_op * 1e6:.3f} us/op")
    ratio = results[2 ** 15] / results[2 ** 14]
    print(f"doubling ratio: {ratio:.3f} (log-N scaling target: < 1.3)")


if __name__ == "__main__":
    main()
