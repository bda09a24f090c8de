"""Synthetic workloads shared by the unit and acceptance suites."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from labelgraph.datasets import clustered
from labelgraph.evaluation import brute_force_groundtruth, compute_recall
from labelgraph.graph import BuildParams, GraphIndex, build_index
from labelgraph.search import SearchParams, VectorStore, greedy_search


@dataclass
class PlantedWorkload:
    base: np.ndarray
    index: GraphIndex
    train_q: np.ndarray
    train_gt: List[List[int]]
    test_q: np.ndarray
    test_gt: List[List[int]]


def planted_mixed_difficulty(n: int = 1500, dim: int = 16, per_family: int = 80,
                             test_per_family: int = 40, ef_low: int = 10,
                             seed: int = 1) -> PlantedWorkload:
    """Queries near base points (easy) mixed with far-away queries (hard).

    Training queries are kept only when their family agrees with their
    label (easy ones reach full recall with the small pool, hard ones do
    not), so the two classes are separable by construction. Test queries
    are not filtered.
    """
    base, _ = clustered(n, dim, n_clusters=8, seed=seed)
    index = build_index(base, BuildParams(m_c=16, ef_c=48))
    store = VectorStore(base)

    def family(count, s, easy):
        r = np.random.default_rng(s)
        if easy:
            picks = base[r.choice(len(base), count)]
            return (picks + 0.01 * r.standard_normal((count, dim))).astype(np.float32)
        return r.uniform(-3, 3, (count, dim)).astype(np.float32)

    def consistent(count, s, easy):
        q = family(3 * count, s, easy)
        gt = brute_force_groundtruth(base, q, 10)[0].tolist()
        low = SearchParams(k=10, ef_s=ef_low)
        ok = [i for i in range(len(q))
              if easy == (compute_recall(greedy_search(index, store, q[i], low).ids,
                                         gt[i], 10) >= 1.0)]
        return q[ok[:count]], [gt[i] for i in ok[:count]]

    (qe, ge) = consistent(per_family, seed, True)
    (qh, gh) = consistent(per_family, seed + 1, False)
    test_q = np.vstack([family(test_per_family, seed + 2, True),
                        family(test_per_family, seed + 3, False)])
    return PlantedWorkload(base, index, np.vstack([qe, qh]), ge + gh, test_q,
                           brute_force_groundtruth(base, test_q, 10)[0].tolist())
