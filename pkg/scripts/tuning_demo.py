"""Tune prefetch settings, label filters and adaptive pool sizing on small synthetic data.

    python3 scripts/tuning_demo.py --min-recall 0.95
"""

import argparse

import numpy as np

from labelgraph.datasets import clustered, sample_rows
from labelgraph.evaluation import brute_force_groundtruth, mean_recall
from labelgraph.graph import DEFAULT_ALPHAS, BuildParams, build_index
from labelgraph.search import SearchParams, VectorStore, greedy_search
from labelgraph.tune import (ElpGrid, adaptive_search, select_ilp, sweep_ilp,
                             train_qlp_model, tune_elp)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3000)
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--min-recall", type=float, default=0.95)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    base, queries = clustered(args.n, args.dim, seed=args.seed, n_queries=200)
    index = build_index(base, BuildParams(m_c=24, ef_c=64))
    store = VectorStore(base)
    truth = brute_force_groundtruth(base, queries, 10)[0].tolist()

    env = tune_elp(index, store, sample_rows(base, 50, args.seed), ElpGrid(),
                   SearchParams(k=10, ef_s=64))
    print(f"prefetch: stride {env.prefetch_stride}, depth {env.prefetch_depth}")

    front = sweep_ilp(index, store, queries[:100], truth[:100], (8, 16, 24), DEFAULT_ALPHAS,
                      ef_s=48, env=env)
    print("frontier (m_s, alpha_s) recall qps:")
    for p in front.points:
        print(f"  {p.config}  {p.recall:.4f}  {p.qps:.0f}")
    try:
        pick = select_ilp(front, min_recall=args.min_recall)
        print(f"selected {pick.config} at recall {pick.recall:.4f}")
    except ValueError as err:
        print(f"no selection: {err}")

    model = train_qlp_model(index, store, queries[:100], truth[:100], target_recall=1.0,
                            ef_low=16, ef_high=96)
    print(f"pool-size model: held-out accuracy {model.held_out_accuracy:.2f}, "
          f"class counts {model.class_counts}")
    params = SearchParams(k=10, ef_s=96)
    test_q, test_gt = queries[100:], truth[100:]
    fixed = [greedy_search(index, store, q, params, env) for q in test_q]
    adapt = [adaptive_search(index, store, q, model, params, env) for q in test_q]
    for name, rs in (("fixed", fixed), ("adaptive", adapt)):
        print(f"{name:9s} recall {mean_recall([r.ids for r in rs], test_gt, 10):.4f}  "
              f"mean n_lp {np.mean([r.stats.n_lp for r in rs]):.1f}")


if __name__ == "__main__":
    main()
