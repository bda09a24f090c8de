"""Grid search over prefetch stride and depth.

Prefetch settings never change search results, so only throughput is
measured.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..graph import GraphIndex
from ..search import EnvParams, SearchParams, VectorStore, greedy_search

Timer = Callable[[Callable[[], None], EnvParams], float]


@dataclass(frozen=True)
class ElpGrid:
    strides: Tuple[int, ...] = (0, 2, 4, 8)
    depths: Tuple[int, ...] = (1, 2, 4)
    repetitions: int = 3

    def __post_init__(self):
        if not self.strides or not self.depths:
            raise ValueError("prefetch grid must not be empty")
        if self.repetitions < 3:
            raise ValueError("need at least 3 repetitions per configuration")

    def configs(self) -> List[EnvParams]:
        return [EnvParams(w, v) for w in self.strides for v in self.depths]


def wall_clock(run: Callable[[], None], env: EnvParams) -> float:
    start = time.perf_counter()
    run()
    return time.perf_counter() - start


def profile_elp(index: GraphIndex, store: VectorStore, sample_queries: np.ndarray,
                grid: ElpGrid, params: SearchParams = SearchParams(),
                timer: Optional[Timer] = None) -> Dict[EnvParams, float]:
    """Median queries/second of each grid configuration."""
    timer = timer or wall_clock
    queries = np.asarray(sample_queries)
    if len(queries) == 0:
        raise ValueError("no sample queries")
    out = {}
    for env in grid.configs():
        def run(env=env):
            for q in queries:
                greedy_search(index, store, q, params, env)
        samples = [timer(run, env) for _ in range(grid.repetitions)]
        secs = statistics.median(samples)
        out[env] = len(queries) / secs if secs > 0 else float("inf")
    return out


def best_env(throughput: Dict[EnvParams, float]) -> EnvParams:
    # highest qps, then smaller stride, then smaller depth
    return min(throughput, key=lambda e: (-throughput[e], e.prefetch_stride, e.prefetch_depth))


def tune_elp(index: GraphIndex, store: VectorStore, sample_queries: np.ndarray,
             grid: ElpGrid, params: SearchParams = SearchParams(),
             timer: Optional[Timer] = None) -> EnvParams:
    return best_env(profile_elp(index, store, sample_queries, grid, params, timer))
