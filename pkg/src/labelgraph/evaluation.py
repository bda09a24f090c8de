"""Exact ground truth and recall."""

from __future__ import annotations

from typing import List, Sequence, Tuple, Union

import numpy as np

from .core import ArrayLike, Dataset, Metric, as_dataset


def brute_force_groundtruth(dataset: Union[Dataset, ArrayLike], queries: ArrayLike, k: int,
                            metric: Union[str, Metric] = Metric.L2
                            ) -> Tuple[np.ndarray, np.ndarray]:
    """Exact top-k ids and distances per query by exhaustive scan.

    Equal distances are ordered by lower id (stable sort over id order).
    """
    ds = as_dataset(dataset)
    metric = Metric.parse(metric)
    if k > len(ds):
        raise ValueError(f"k={k} exceeds dataset size {len(ds)}")
    Q = np.asarray(queries, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q[None, :]
    if Q.shape[0] and Q.shape[1] != ds.dim:
        raise ValueError(f"dimension mismatch: queries {Q.shape[1]}, dataset {ds.dim}")
    X = ds.f64
    ids = np.empty((Q.shape[0], k), dtype=np.int64)
    dists = np.empty((Q.shape[0], k), dtype=np.float64)
    for qi, q in enumerate(Q):
        if metric is Metric.L2:
            diff = X - q
            d = np.einsum("ij,ij->i", diff, diff)
        else:
            d = -(X @ q)
        order = np.argsort(d, kind="stable")[:k]
        ids[qi] = order
        dists[qi] = d[order]
    return ids, dists


def compute_recall(result_ids: Sequence[int], truth_ids: Sequence[int], k: int) -> float:
    """``|first k results & first k truth| / k``; short (underfilled) results are allowed."""
    got = set(int(i) for i in list(result_ids)[:k])
    want = set(int(i) for i in list(truth_ids)[:k])
    return len(got & want) / k


def mean_recall(results: Sequence[Sequence[int]], truth: Sequence[Sequence[int]], k: int) -> float:
    if len(results) != len(truth):
        raise ValueError("results and ground truth differ in length")
    if not results:
        return 0.0
    return float(np.mean([compute_recall(r, t, k) for r, t in zip(results, truth)]))


def recall_per_query(results: Sequence[Sequence[int]], truth: Sequence[Sequence[int]],
                     k: int) -> List[float]:
    return [compute_recall(r, t, k) for r, t in zip(results, truth)]
