"""Per-query candidate-pool sizing with an early-termination classifier.

Every query starts with a large pool (``ef_high``). After a fixed number of
hops a handful of features describing the current pool are fed to a small
decision tree; queries it deems easy continue with the pool shrunk to
``ef_low``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..evaluation import compute_recall
from ..graph import GraphIndex
from ..pool import CandidatePool
from ..search import EnvParams, SearchParams, SearchResult, VectorStore, greedy_search
from .tree import DecisionTree

FEATURE_NAMES = ("scanned_count", "top5_mean", "top5_std", "top5_min", "top5_max",
                 "top5_progression", "topk_gap")

SHRINK = 1
KEEP = 0


@dataclass(frozen=True)
class QueryFeatures:
    scanned_count: int
    top5_mean: float
    top5_std: float
    top5_min: float
    top5_max: float
    top5_progression: float
    topk_gap: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES], dtype=np.float64)


def top5_mean(dists: Sequence[float]) -> Optional[float]:
    return float(np.mean(dists[:5])) if len(dists) >= 5 else None


def extract_features(dists: Sequence[float], scanned_count: int,
                     previous_top5_mean: Optional[float] = None, k: int = 10) -> QueryFeatures:
    """Features of a pool snapshot; ``dists`` ascending.

    ``top5_progression`` is how much the top-5 mean fell since the previous
    snapshot (0 without one). ``topk_gap`` is the relative spread between the
    best and the k-th best distance.
    """
    if len(dists) < 5:
        raise ValueError("need at least 5 candidates to extract features")
    top = np.asarray(dists[:5], dtype=np.float64)
    mean = float(top.mean())
    progression = 0.0 if previous_top5_mean is None else float(previous_top5_mean) - mean
    best = float(dists[0])
    kth = float(dists[min(k, len(dists)) - 1])
    gap = (kth - best) / max(abs(best), 1e-12)
    return QueryFeatures(scanned_count=int(scanned_count), top5_mean=mean,
                         top5_std=float(top.std()), top5_min=float(top.min()),
                         top5_max=float(top.max()), top5_progression=progression,
                         topk_gap=float(gap))


class FeatureProbe:
    """Checkpoint callback that snapshots the pool and optionally shrinks it.

    The earlier snapshot for the progression feature is taken at hop
    ``checkpoint_hop // 2``. If the pool holds fewer than 5 candidates at the
    checkpoint, extraction is retried on the following hops.
    """

    def __init__(self, checkpoint_hop: int, k: int, model: Optional["DecisionModel"] = None):
        if checkpoint_hop < 1:
            raise ValueError("checkpoint hop must be >= 1")
        self.checkpoint_hop = checkpoint_hop
        self.early_hop = max(1, checkpoint_hop // 2)
        self.k = k
        self.model = model
        self.previous: Optional[float] = None
        self.features: Optional[QueryFeatures] = None
        self.decision: Optional[int] = None

    def __call__(self, hop: int, pool: CandidatePool, scanned: int) -> Optional[int]:
        if self.features is not None:
            return None
        if hop == self.early_hop and hop < self.checkpoint_hop:
            self.previous = top5_mean(pool.dists())
        if hop < self.checkpoint_hop or len(pool) < 5:
            return None
        self.features = extract_features(pool.dists(), scanned, self.previous, self.k)
        if self.model is None:
            return None
        self.decision = self.model.decide(self.features)
        return self.model.ef_low if self.decision == SHRINK else None


@dataclass
class DecisionModel:
    tree: DecisionTree
    checkpoint_hop: int
    ef_low: int
    ef_high: int
    target_recall: float
    k: int = 10
    held_out_accuracy: Optional[float] = None
    degenerate: bool = False
    class_counts: Dict[str, int] = field(default_factory=dict)

    def decide(self, features: QueryFeatures) -> int:
        return int(self.tree.predict(features.as_array()[None, :])[0])

    def to_dict(self) -> Dict[str, Any]:
        meta = asdict(self)
        meta["tree"] = self.tree.to_dict()
        meta["feature_names"] = list(FEATURE_NAMES)
        return meta

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DecisionModel":
        data = dict(data)
        data.pop("feature_names", None)
        data["tree"] = DecisionTree.from_dict(data["tree"])
        return cls(**data)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "DecisionModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def constant(cls, decision: int, checkpoint_hop: int, ef_low: int, ef_high: int,
                 target_recall: float = 1.0, k: int = 10) -> "DecisionModel":
        return cls(DecisionTree.constant(decision), checkpoint_hop, ef_low, ef_high,
                   target_recall, k, degenerate=True)


def _with_ef(params: SearchParams, ef: int) -> SearchParams:
    return SearchParams(k=params.k, ef_s=ef, m_s=params.m_s, alpha_s=params.alpha_s,
                        rerank=params.rerank)


def probe_features(index: GraphIndex, store: VectorStore, query: np.ndarray,
                   params: SearchParams, checkpoint_hop: int,
                   env: EnvParams = EnvParams()) -> Optional[QueryFeatures]:
    probe = FeatureProbe(checkpoint_hop, params.k)
    greedy_search(index, store, query, params, env, checkpoint=probe)
    return probe.features


def train_qlp_model(index: GraphIndex, store: VectorStore, queries: np.ndarray,
                    truth: Sequence[Sequence[int]], target_recall: float, ef_low: int,
                    ef_high: int, checkpoint_hop: int = 10,
                    params: SearchParams = SearchParams(), holdout: float = 0.25,
                    max_depth: int = 4, min_samples_leaf: int = 2, seed: int = 0
                    ) -> DecisionModel:
    """Label each query easy iff ``ef_low`` already reaches ``target_recall``.

    Features come from an ``ef_high`` run at the checkpoint hop. The tree is
    fitted on a random ``1 - holdout`` share of the queries and scored on the
    rest.
    """
    if not ef_low <= ef_high:
        raise ValueError("ef_low must not exceed ef_high")
    k = params.k
    queries = np.asarray(queries)
    if len(queries) != len(truth):
        raise ValueError("queries and ground truth differ in length")
    low = _with_ef(params, ef_low)
    high = _with_ef(params, ef_high)
    feats, labels = [], []
    for q, t in zip(queries, truth):
        res = greedy_search(index, store, q, low)
        labels.append(SHRINK if compute_recall(res.ids, t, k) >= target_recall else KEEP)
        f = probe_features(index, store, q, high, checkpoint_hop)
        # a query that ends before the checkpoint is trivially easy to classify
        feats.append(f.as_array() if f is not None else np.full(len(FEATURE_NAMES), np.nan))
    y = np.asarray(labels, dtype=np.int64)
    X = np.asarray(feats)
    counts = {"shrink": int(y.sum()), "keep": int(y.size - y.sum())}
    usable = ~np.isnan(X).any(axis=1)

    if y.min() == y.max():
        warnings.warn("every training query landed in one class; using a constant model")
        model = DecisionModel.constant(int(y[0]), checkpoint_hop, ef_low, ef_high,
                                       target_recall, k)
        model.class_counts = counts
        model.held_out_accuracy = 1.0
        return model

    X, y = X[usable], y[usable]
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(y))
    n_test = int(round(holdout * len(y))) if len(y) > 1 else 0
    test, train = order[:n_test], order[n_test:]
    tree = DecisionTree(max_depth, min_samples_leaf).fit(X[train], y[train])
    acc = float((tree.predict(X[test]) == y[test]).mean()) if n_test else None
    return DecisionModel(tree, checkpoint_hop, ef_low, ef_high, target_recall, k,
                         held_out_accuracy=acc, class_counts=counts)


def adaptive_search(index: GraphIndex, store: VectorStore, query: np.ndarray,
                    model: DecisionModel, params: SearchParams = SearchParams(),
                    env: EnvParams = EnvParams()) -> SearchResult:
    """Search with ``ef_high``; shrink to ``ef_low`` when the model calls the query easy."""
    probe = FeatureProbe(model.checkpoint_hop, params.k, model)
    return greedy_search(index, store, query, _with_ef(params, model.ef_high), env,
                         checkpoint=probe)
