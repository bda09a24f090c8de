"""Slow, independent reference implementations used as test oracles.

Nothing here imports from the package under test.
"""

from __future__ import annotations

import math
from decimal import ROUND_HALF_UP, Decimal
from typing import List, Sequence


def sq_dist(a: Sequence[float], b: Sequence[float]) -> float:
    return math.fsum((float(x) - float(y)) ** 2 for x, y in zip(a, b))


def dot(a: Sequence[float], b: Sequence[float]) -> float:
    return math.fsum(float(x) * float(y) for x, y in zip(a, b))


def single_alpha_prune(ids: Sequence[int], sq_dists: Sequence[float], alpha: float, m: int,
                       vectors) -> List[int]:
    """Greedy robust pruning with one rate over an ascending candidate list.

    A candidate survives iff no already-kept candidate k satisfies
    ``alpha * |x_k - x_j| <= |x_i - x_j|``; at most ``m`` survive.
    """
    kept: List[int] = []
    for j, t in zip(ids, sq_dists):
        if len(kept) >= m:
            break
        dj = math.sqrt(t)
        if any(alpha * math.sqrt(sq_dist(vectors[k], vectors[j])) <= dj for k in kept):
            continue
        kept.append(j)
    return kept


def order_stat(values: Sequence[float], q: float) -> float:
    s = sorted(values)
    return s[math.floor(q * (len(s) - 1))]


def sq_level(x: float, lo: float, hi: float, bits: int) -> int:
    if hi == lo:
        return 0
    top = 2 ** bits - 1
    c = min(max(x, lo), hi)
    v = Decimal(float((c - lo) / (hi - lo) * top)).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return int(v)


def sq_value(level: int, lo: float, hi: float, bits: int) -> float:
    if hi == lo:
        return lo
    return lo + level * (hi - lo) / (2 ** bits - 1)


def knn(base, q, k: int) -> List[int]:
    d = [(sq_dist(x, q), i) for i, x in enumerate(base)]
    d.sort()
    return [i for _, i in d[:k]]


def dominated(p, q) -> bool:
    """True iff ``q`` dominates ``p`` over (recall, qps)."""
    return q[0] >= p[0] and q[1] >= p[1] and (q[0] > p[0] or q[1] > p[1])
