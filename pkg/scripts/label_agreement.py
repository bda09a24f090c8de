"""Compare label-filtered neighbor sets against per-rate greedy pruning.

For each inserted point the recorded candidate list is relabeled and, for
every rate, the edges with label <= rate are compared with a standalone
single-rate pruner run on the same candidates.
"""

import argparse
import math
from collections import Counter

import numpy as np

from labelgraph.datasets import uniform
from labelgraph.graph import DEFAULT_ALPHAS, BuildParams, build_index, prune_based_labeling


def greedy_prune(ids, sq_dists, X, alpha, m):
    kept = []
    for j, t in zip(ids, sq_dists):
        if len(kept) >= m:
            break
        if all(alpha * math.dist(X[k], X[j]) > math.sqrt(t) for k in kept):
            kept.append(j)
    return kept


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--m-c", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    X = uniform(args.n, args.dim, seed=args.seed)
    Xd = X.astype(np.float64)
    trace = []
    build_index(X, BuildParams(m_c=args.m_c, ef_c=64), trace=trace)
    differ, extra, missing = Counter(), Counter(), Counter()
    for _, ids, dists in trace:
        g, lab, _ = prune_based_labeling(ids, dists, DEFAULT_ALPHAS, args.m_c, vectors=Xd)
        for a in DEFAULT_ALPHAS:
            mine = [j for j, l in zip(g, lab) if l <= a]
            ref = greedy_prune(ids, dists, Xd, a, args.m_c)
            if mine != ref:
                differ[a] += 1
                extra[a] += len(set(mine) - set(ref))
                missing[a] += len(set(ref) - set(mine))
    print(f"{len(trace)} candidate lists")
    print(f"{'rate':>5} {'differ':>7} {'extra':>7} {'missing':>8}")
    for a in DEFAULT_ALPHAS:
        print(f"{a:5.1f} {differ[a]:7d} {extra[a]:7d} {missing[a]:8d}")


if __name__ == "__main__":
    main()
