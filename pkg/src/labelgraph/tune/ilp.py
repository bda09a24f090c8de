"""Recall/throughput sweep over label filters on one built index, plus selection."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from ..evaluation import mean_recall
from ..graph import GraphIndex
from ..search import EnvParams, SearchParams, VectorStore, greedy_search

SweepTimer = Callable[[Callable[[], None], Tuple[int, float]], float]


@dataclass(frozen=True)
class FrontierPoint:
    config: Hashable
    recall: float
    qps: float

    @property
    def latency(self) -> float:
        return 1.0 / self.qps if self.qps > 0 else float("inf")

    def dominates(self, other: "FrontierPoint") -> bool:
        return (self.recall >= other.recall and self.qps >= other.qps
                and (self.recall > other.recall or self.qps > other.qps))


@dataclass
class ParetoFrontier:
    points: List[FrontierPoint]
    evaluated: List[FrontierPoint] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def configs(self) -> List[Hashable]:
        return [p.config for p in self.points]


def pareto_frontier(points: Sequence[FrontierPoint]) -> ParetoFrontier:
    """Points no other point dominates, ordered by descending recall.

    Exact duplicates in (recall, qps) all survive since neither dominates.
    """
    pts = list(points)
    keep = [p for p in pts if not any(o.dominates(p) for o in pts)]
    keep.sort(key=lambda p: (-p.recall, -p.qps, _config_key(p.config)))
    return ParetoFrontier(keep, pts)


def _config_key(config: Hashable):
    return config if isinstance(config, tuple) else (config,)


def _wall(run: Callable[[], None], config) -> float:
    start = time.perf_counter()
    run()
    return time.perf_counter() - start


def sweep_ilp(index: GraphIndex, store: VectorStore, queries: np.ndarray,
              truth: Sequence[Sequence[int]], m_values: Sequence[int],
              alpha_values: Sequence[float], ef_s: int = 64, k: int = 10,
              rerank: float = 3.0, env: EnvParams = EnvParams(),
              timer: Optional[SweepTimer] = None, warmup: bool = True) -> ParetoFrontier:
    """Evaluate every (m_s, alpha_s) by filtered search on the same index."""
    lo, hi = index.alphas[0], index.alphas[-1]
    for a in alpha_values:
        if not lo <= a <= hi:
            raise ValueError(f"alpha_s={a} outside the built label range [{lo}, {hi}]")
    for m in m_values:
        if not 1 <= m <= index.m_c:
            raise ValueError(f"m_s={m} outside [1, {index.m_c}]")
    if not m_values or not alpha_values:
        raise ValueError("empty parameter grid")
    timer = timer or _wall
    queries = np.asarray(queries)
    if len(queries) == 0 or len(queries) != len(truth):
        raise ValueError("need a non-empty query set with matching ground truth")
    evaluated = []
    for m in m_values:
        for a in alpha_values:
            params = SearchParams(k=k, ef_s=ef_s, m_s=int(m),
                                  alpha_s=float(a), rerank=rerank)
            results: List[List[int]] = []

            def run(params=params, out=results):
                out.clear()
                for q in queries:
                    out.append(greedy_search(index, store, q, params, env).ids)
            if warmup:
                run()
            secs = timer(run, (int(m), float(a)))
            recall = mean_recall(results, truth, k)
            qps = len(queries) / secs if secs > 0 else float("inf")
            evaluated.append(FrontierPoint((int(m), float(a)), recall, qps))
    return pareto_frontier(evaluated)


def select_ilp(frontier: ParetoFrontier, min_recall: Optional[float] = None,
               max_latency: Optional[float] = None) -> FrontierPoint:
    """Fastest point with recall >= ``min_recall``, or most accurate within ``max_latency``.

    Both thresholds are inclusive. Ties prefer higher recall (or higher qps)
    and then the smaller config.
    """
    if (min_recall is None) == (max_latency is None):
        raise ValueError("give exactly one of min_recall or max_latency")
    if not frontier.points:
        raise ValueError("empty frontier")
    if min_recall is not None:
        ok = [p for p in frontier.points if p.recall >= min_recall]
        if not ok:
            best = max(p.recall for p in frontier.points)
            raise ValueError(f"no configuration reaches recall {min_recall}; "
                             f"best available recall is {best:.4f}")
        return min(ok, key=lambda p: (-p.qps, -p.recall, _config_key(p.config)))
    ok = [p for p in frontier.points if p.latency <= max_latency]
    if not ok:
        best = min(p.latency for p in frontier.points)
        raise ValueError(f"no configuration meets latency {max_latency}s; "
                         f"best available latency is {best:.6g}s")
    return min(ok, key=lambda p: (-p.recall, -p.qps, _config_key(p.config)))


def tuning_report(frontier: ParetoFrontier, selection: Optional[FrontierPoint] = None
                  ) -> Dict[str, Any]:
    def row(p: FrontierPoint) -> Dict[str, Any]:
        cfg = list(p.config) if isinstance(p.config, tuple) else p.config
        return {"config": cfg, "recall": p.recall, "qps": p.qps}
    return {
        "evaluated": [row(p) for p in frontier.evaluated],
        "frontier": [row(p) for p in frontier.points],
        "selection": row(selection) if selection is not None else None,
    }


def write_report(report: Dict[str, Any], path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
