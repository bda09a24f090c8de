"""Deterministic-access greedy search over a labeled graph.

A hop first collects the ids of the neighbors it will visit (unvisited,
label within ``alpha_s``, at most ``m_s``) without touching vector data,
then issues prefetch hints ``stride`` neighbors ahead of the one being
evaluated, and only then reads payloads. Each node's payload is therefore
read at most once per query.

Candidates are ranked by a low-precision distance (quantized codes, or the
decomposed float distance for a full-precision store) and the nearest few
are re-ranked with exact distances before the top-k is returned.
"""

from __future__ import annotations

import math
from bisect import insort
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import (ArrayLike, Dataset, Metric, PreparedQuery, as_dataset, as_vector,
                   batch_decomposed_distance, batch_exact_distance, precompute_base_norms)
from .graph import GraphIndex
from .pool import CandidatePool
from .quant import CodeStore, LowPrecQuery

CACHE_LINE = 64


@dataclass(frozen=True)
class SearchParams:
    """Query-time knobs. ``m_s``/``alpha_s`` default to the index's relaxed limits."""

    k: int = 10
    ef_s: int = 64
    m_s: Optional[int] = None
    alpha_s: Optional[float] = None
    rerank: float = 3.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.ef_s < self.k:
            raise ValueError(f"ef_s ({self.ef_s}) must be >= k ({self.k})")
        if self.m_s is not None and self.m_s < 1:
            raise ValueError("m_s must be positive")
        if self.rerank < 1.0:
            raise ValueError("rerank factor must be >= 1")

    def resolve(self, index: GraphIndex) -> Tuple[int, float]:
        m_s = index.m_c if self.m_s is None else self.m_s
        alpha_s = index.alphas[-1] if self.alpha_s is None else float(self.alpha_s)
        if m_s > index.m_c:
            raise ValueError(f"m_s={m_s} exceeds the index degree limit {index.m_c}")
        if not index.alphas[0] <= alpha_s <= index.alphas[-1]:
            raise ValueError(f"alpha_s={alpha_s} outside the built range "
                             f"[{index.alphas[0]}, {index.alphas[-1]}]")
        return m_s, alpha_s


@dataclass(frozen=True)
class EnvParams:
    """Prefetch stride (neighbors ahead; 0 disables) and depth (64-byte lines)."""

    prefetch_stride: int = 0
    prefetch_depth: int = 1

    def __post_init__(self):
        if self.prefetch_stride < 0 or self.prefetch_depth < 0:
            raise ValueError("prefetch stride and depth must be non-negative")


@dataclass
class SearchStats:
    n_lp: int = 0
    n_hp: int = 0
    fetches: int = 0
    hops: int = 0
    prefetches: int = 0
    underfilled: bool = False


@dataclass
class SearchResult:
    ids: List[int]
    dists: List[float]
    stats: SearchStats = field(default_factory=SearchStats)


def prefetch_hint(span: Tuple[int, int], depth: int) -> None:
    """Advisory prefetch of ``depth`` cache lines from ``span``.

    The interpreter gives no portable way to issue a hardware prefetch, so
    this is a no-op. It must never influence a computed value.
    """
    return None


# -- storage adapters -----------------------------------------------------------


class VectorStore:
    """Full-precision storage: the low-precision distance is the decomposed float one."""

    def __init__(self, dataset: Union[Dataset, ArrayLike], metric: Union[str, Metric] = Metric.L2):
        self.dataset = as_dataset(dataset)
        self.metric = Metric.parse(metric)
        self.norms = precompute_base_norms(self.dataset)
        self.row_bytes = 4 * self.dataset.dim
        # decomposition rounding only; well below any distance gap that matters
        self.error_bound = 1e-9

    def __len__(self) -> int:
        return len(self.dataset)

    def prepare(self, q: np.ndarray) -> PreparedQuery:
        return PreparedQuery.prepare(q, self.metric)

    def distances(self, pq, ids: Sequence[int]) -> np.ndarray:
        return batch_decomposed_distance(self.dataset.f64[ids], self.norms[ids], pq)

    def neighbor_distances(self, pq, node: int, positions: Sequence[int],
                           ids: Sequence[int]) -> np.ndarray:
        return self.distances(pq, ids)

    def span(self, node: int) -> Tuple[int, int]:
        return node * self.row_bytes, self.row_bytes

    def prefetch(self, node: int, depth: int) -> None:
        prefetch_hint(self.span(node), depth)

    def exact(self, q: np.ndarray, ids: Sequence[int]) -> np.ndarray:
        return batch_exact_distance(self.dataset.f64[ids], q, self.metric)


class QuantizedStore(VectorStore):
    """Scalar-quantized codes for traversal, the float dataset for re-ranking."""

    def __init__(self, codes: CodeStore, dataset: Union[Dataset, ArrayLike],
                 metric: Union[str, Metric] = Metric.L2):
        super().__init__(dataset, metric)
        if codes.count != len(self.dataset):
            raise ValueError(f"{codes.count} codes for {len(self.dataset)} vectors")
        self.codes = codes
        self.row_bytes = codes.code_len_bytes
        # largest reconstruction error over the stored vectors, outliers included
        recon = self.dataset.f64 - codes.decoded()
        self.error_bound = float(np.sqrt(np.einsum("ij,ij->i", recon, recon).max()))

    def prepare(self, q: np.ndarray) -> LowPrecQuery:
        return LowPrecQuery(self.codes.model, q, self.metric)

    def distances(self, lpq, ids: Sequence[int]) -> np.ndarray:
        return lpq.distances(self.codes.levels[ids], self.codes.code_norms[ids])


class PrsStore(QuantizedStore):
    """Quantized store where some nodes also carry their neighbors' codes inline.

    Expanding a node with a redundant block reads one contiguous run of
    codes in neighbor-list order instead of gathering from the global table.
    """

    def __init__(self, index: GraphIndex, codes: CodeStore, dataset: Union[Dataset, ArrayLike],
                 delta: float, metric: Union[str, Metric, None] = None):
        super().__init__(codes, dataset, index.metric if metric is None else metric)
        if not 0.0 <= delta <= 1.0:
            raise ValueError(f"redundancy ratio must lie in [0, 1], got {delta}")
        self.delta = delta
        self.selection_rule = "in-degree"
        n = index.n
        count = int(math.floor(delta * n + 0.5))
        indeg = index.in_degrees()
        order = sorted(range(n), key=lambda i: (-indeg[i], i))
        self.blocks = {}
        self.block_levels = {}
        self.block_norms = {}
        for i in sorted(order[:count]):
            nbrs = index.neighbors[i]
            self.blocks[i] = np.ascontiguousarray(codes.codes[nbrs])
            self.block_levels[i] = codes.levels[nbrs]
            self.block_norms[i] = codes.code_norms[nbrs]

    @property
    def extra_bytes(self) -> int:
        return sum(block.nbytes for block in self.blocks.values())

    def neighbor_distances(self, lpq, node: int, positions: Sequence[int],
                           ids: Sequence[int]) -> np.ndarray:
        levels = self.block_levels.get(node)
        if levels is None:
            return self.distances(lpq, ids)
        return lpq.distances(levels[positions], self.block_norms[node][positions])


def build_prs(index: GraphIndex, codes: CodeStore, delta: float,
              dataset: Union[Dataset, ArrayLike]) -> PrsStore:
    return PrsStore(index, codes, dataset, delta)


class InstrumentedStore:
    """Wraps a store and counts payload reads and prefetch hints per node."""

    def __init__(self, inner: VectorStore):
        self.inner = inner
        self.fetches: Counter = Counter()
        self.prefetch_calls: List[Tuple[int, int]] = []

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def __len__(self) -> int:
        return len(self.inner)

    def reset(self) -> None:
        self.fetches.clear()
        self.prefetch_calls.clear()

    def distances(self, pq, ids):
        self.fetches.update(ids)
        return self.inner.distances(pq, ids)

    def neighbor_distances(self, pq, node, positions, ids):
        self.fetches.update(ids)
        return self.inner.neighbor_distances(pq, node, positions, ids)

    def prefetch(self, node: int, depth: int) -> None:
        self.prefetch_calls.append((node, depth))
        self.inner.prefetch(node, depth)


# -- search ---------------------------------------------------------------------

Checkpoint = Callable[[int, CandidatePool, int], Optional[int]]


def selective_rerank(candidates: Sequence[Tuple[float, int]], query: np.ndarray,
                     store: VectorStore, k: int, rerank: float = 3.0,
                     stats: Optional[SearchStats] = None) -> Tuple[List[int], List[float]]:
    """Exact distances for the ``ceil(rerank * k)`` low-precision nearest candidates.

    ``candidates`` must be sorted ascending by low-precision distance.
    Re-ranking stops early once the next candidate cannot beat the current
    k-th exact distance given the store's reconstruction-error bound.
    """
    if not candidates:
        raise ValueError("cannot re-rank an empty candidate pool")
    if rerank < 1.0:
        raise ValueError("rerank factor must be >= 1")
    q = as_vector(query)
    budget = min(int(math.ceil(rerank * k)), len(candidates))
    err = store.error_bound
    l2 = store.metric is Metric.L2
    if not l2:
        err *= float(np.sqrt(q @ q))
    X = store.dataset.f64
    best: List[Tuple[float, int]] = []
    n_hp = 0
    for d_low, j in candidates[:budget]:
        if len(best) >= k:
            kth = best[k - 1][0]
            if l2:
                if math.sqrt(max(d_low, 0.0)) - err > math.sqrt(max(kth, 0.0)):
                    break
            elif d_low - err > kth:
                break
        x = X[j]
        if l2:
            diff = x - q
            d_high = float(diff @ diff)
        else:
            d_high = -float(x @ q)
        n_hp += 1
        insort(best, (d_high, j))
    if stats is not None:
        stats.n_hp += n_hp
    top = best[:k]
    return [j for _, j in top], [d for d, _ in top]


def greedy_search(index: GraphIndex, store: VectorStore, query: ArrayLike,
                  params: SearchParams = SearchParams(), env: EnvParams = EnvParams(),
                  entry: Optional[Sequence[int]] = None,
                  checkpoint: Optional[Checkpoint] = None) -> SearchResult:
    """Greedy beam search with label filtering, stride prefetch and re-ranking.

    ``checkpoint(hop, pool, scanned)`` runs after every expansion; returning
    an int shrinks the pool to that capacity for the rest of the query.
    """
    n = index.n
    if params.k > n:
        raise ValueError(f"k={params.k} exceeds the number of indexed points ({n})")
    if len(store) != n:
        raise ValueError(f"store holds {len(store)} vectors, index has {n} nodes")
    m_s, alpha_s = params.resolve(index)
    entry = list(index.entry_points if entry is None else entry)
    if not entry or any(not 0 <= e < n for e in entry):
        raise ValueError(f"entry points {entry} out of range for {n} nodes")
    q = as_vector(query, index.dim)

    stats = SearchStats()
    pq = store.prepare(q)
    pool = CandidatePool(params.ef_s)
    visited = set(entry)
    entry = sorted(visited)
    for d, j in zip(store.distances(pq, entry).tolist(), entry):
        pool.insert(d, j)
    stats.n_lp += len(entry)
    stats.fetches += len(entry)

    stride = env.prefetch_stride
    depth = env.prefetch_depth
    G = index.neighbors
    L = index.labels
    while True:
        item = pool.pop_nearest_unexpanded()
        if item is None:
            break
        node = item[1]
        stats.hops += 1
        # ids only: no payload is touched while selecting the batch
        positions = []
        ids = []
        for p, (j, lab) in enumerate(zip(G[node], L[node])):
            if j not in visited and lab <= alpha_s:
                positions.append(p)
                ids.append(j)
                visited.add(j)
                if len(ids) >= m_s:
                    break
        if ids:
            width = len(ids)
            if stride:
                for p in range(min(stride, width)):
                    store.prefetch(ids[p], depth)
                for p in range(width - stride):
                    # issued while neighbor p is being evaluated
                    store.prefetch(ids[p + stride], depth)
                stats.prefetches += width
            dists = store.neighbor_distances(pq, node, positions, ids).tolist()
            stats.fetches += width
            stats.n_lp += width
            for d, j in zip(dists, ids):
                pool.insert(d, j)
        if checkpoint is not None:
            cap = checkpoint(stats.hops, pool, len(visited))
            if cap is not None and cap < pool.capacity:
                pool.shrink(cap)

    ids, dists = selective_rerank(pool.items(), q, store, params.k, params.rerank, stats)
    stats.underfilled = len(ids) < params.k
    return SearchResult(ids=ids, dists=dists, stats=stats)


def search_batch(index: GraphIndex, store: VectorStore, queries: np.ndarray,
                 params: SearchParams = SearchParams(), env: EnvParams = EnvParams()
                 ) -> List[SearchResult]:
    return [greedy_search(index, store, q, params, env) for q in np.asarray(queries)]
