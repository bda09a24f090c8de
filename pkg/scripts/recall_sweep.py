"""Recall/throughput sweep over pool size and label filters on one clustered index.

    python3 scripts/recall_sweep.py --n 5000 --dim 32 --bits 8
"""

import argparse
import time

import numpy as np

from labelgraph.bench import evaluate, unit_costs
from labelgraph.datasets import clustered
from labelgraph.evaluation import brute_force_groundtruth
from labelgraph.graph import BuildParams, build_index
from labelgraph.quant import CodeStore, train_quantizer
from labelgraph.search import EnvParams, QuantizedStore, SearchParams, VectorStore


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--queries", type=int, default=100)
    ap.add_argument("--m-c", type=int, default=16)
    ap.add_argument("--ef-c", type=int, default=64)
    ap.add_argument("--bits", type=int, choices=(0, 4, 8), default=0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    base, queries = clustered(args.n, args.dim, seed=args.seed, n_queries=args.queries)
    t0 = time.perf_counter()
    index = build_index(base, BuildParams(m_c=args.m_c, ef_c=args.ef_c))
    print(f"built {args.n} x {args.dim} in {time.perf_counter() - t0:.1f}s")
    truth = brute_force_groundtruth(base, queries, 10)[0].tolist()
    if args.bits:
        codes = CodeStore.encode_dataset(train_quantizer(base, bits=args.bits), base)
        store = QuantizedStore(codes, base)
    else:
        store = VectorStore(base)
    t_lp, t_hp = unit_costs(store, queries)

    print(f"{'ef_s':>5} {'m_s':>4} {'alpha_s':>7} {'recall':>7} {'qps':>8} {'n_lp':>7} {'n_hp':>5}")
    half = max(1, args.m_c // 2)
    for ef in (16, 32, 64, 128):
        for m in sorted({half, args.m_c}):
            for a in (1.0, 1.4, 2.0):
                row = evaluate(index, store, queries, truth,
                               SearchParams(k=10, ef_s=ef, m_s=m, alpha_s=a), EnvParams(),
                               t_lp, t_hp)
                print(f"{ef:5d} {m:4d} {a:7.1f} {row.recall_at_k:7.4f} {row.qps:8.1f} "
                      f"{row.cost.n_lp:7.1f} {row.cost.n_hp:5.1f}")
    print(f"mean out-degree {np.mean([len(g) for g in index.neighbors]):.2f}")


if __name__ == "__main__":
    main()
