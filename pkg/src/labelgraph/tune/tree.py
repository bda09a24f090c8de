"""A small CART-style binary classifier (entropy splits, depth-limited)."""

from __future__ import annotations

from typing import Any, Dict, List, Optional

import numpy as np

MAX_DEPTH = 6


def _binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return float(-(p * np.log2(p) + (1 - p) * np.log2(1 - p)))


def _entropy(y: np.ndarray) -> float:
    return _binary_entropy(y.mean()) if y.size else 0.0


def _majority(y: np.ndarray) -> int:
    # ties go to class 0, the conservative "keep" decision
    return int(y.sum() * 2 > y.size)


class DecisionTree:
    """Binary decision tree over float features with 0/1 labels.

    Splits greedily on the threshold with the largest information gain,
    stops at ``max_depth``, at pure nodes, or when no split leaves at least
    ``min_samples_leaf`` samples on both sides. Every leaf therefore holds
    training samples.
    """

    def __init__(self, max_depth: int = 4, min_samples_leaf: int = 1):
        if not 0 <= max_depth <= MAX_DEPTH:
            raise ValueError(f"max_depth must lie in [0, {MAX_DEPTH}]")
        self.max_depth = max_depth
        self.min_samples_leaf = max(1, min_samples_leaf)
        self.root: Optional[Dict[str, Any]] = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "DecisionTree":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
            raise ValueError("need a non-empty 2-d feature matrix matching the labels")
        self.root = self._grow(X, y, 0)
        return self

    def _grow(self, X: np.ndarray, y: np.ndarray, depth: int) -> Dict[str, Any]:
        leaf = {"leaf": _majority(y), "n": int(y.size)}
        if depth >= self.max_depth or y.min() == y.max():
            return leaf
        split = self._best_split(X, y)
        if split is None:
            return leaf
        f, t = split
        mask = X[:, f] <= t
        return {"feature": f, "threshold": t, "n": int(y.size),
                "left": self._grow(X[mask], y[mask], depth + 1),
                "right": self._grow(X[~mask], y[~mask], depth + 1)}

    def _best_split(self, X: np.ndarray, y: np.ndarray):
        base = _entropy(y)
        n = y.size
        best_gain, best = 1e-12, None
        for f in range(X.shape[1]):
            order = np.argsort(X[:, f], kind="stable")
            xs, ys = X[order, f], y[order]
            pos = np.cumsum(ys)
            total = pos[-1]
            for i in range(self.min_samples_leaf, n - self.min_samples_leaf + 1):
                if xs[i - 1] == xs[i]:
                    continue
                left_p = pos[i - 1] / i
                right_p = (total - pos[i - 1]) / (n - i)
                h = (i * _binary_entropy(left_p) + (n - i) * _binary_entropy(right_p)) / n
                gain = base - h
                if gain > best_gain:
                    best_gain = gain
                    best = (f, float((xs[i - 1] + xs[i]) / 2.0))
        return best

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.array([self._predict_one(row) for row in X], dtype=np.int64)

    def _predict_one(self, row: np.ndarray) -> int:
        node = self.root
        if node is None:
            raise RuntimeError("tree has not been fitted")
        while "leaf" not in node:
            node = node["left"] if row[node["feature"]] <= node["threshold"] else node["right"]
        return node["leaf"]

    def depth(self) -> int:
        def walk(node) -> int:
            if "leaf" in node:
                return 0
            return 1 + max(walk(node["left"]), walk(node["right"]))
        return walk(self.root) if self.root is not None else 0

    def leaves(self) -> List[Dict[str, Any]]:
        out = []

        def walk(node):
            if "leaf" in node:
                out.append(node)
            else:
                walk(node["left"])
                walk(node["right"])
        if self.root is not None:
            walk(self.root)
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {"max_depth": self.max_depth, "min_samples_leaf": self.min_samples_leaf,
                "root": self.root}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DecisionTree":
        tree = cls(data["max_depth"], data["min_samples_leaf"])
        tree.root = data["root"]
        return tree

    @classmethod
    def constant(cls, label: int) -> "DecisionTree":
        tree = cls(0)
        tree.root = {"leaf": int(label), "n": 0}
        return tree

