"""Labeled proximity graph.

The index is built once with relaxed limits (``m_c`` and the largest pruning
rate). Every edge is labeled with the smallest pruning rate at which it
survives pruning, so a search can emulate a graph built with a smaller rate
or degree simply by skipping edges whose label is too large, with no rebuild.

Construction always uses squared-euclidean proximity; the index metric only
governs how searches rank candidates.
"""

from __future__ import annotations

import math
import struct
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import ArrayLike, Dataset, Metric, as_dataset
from .pool import CandidatePool

INDEX_MAGIC = b"VSGI"
INDEX_VERSION = 1
_HEAD = struct.Struct("<4sIIIQIII")  # magic, version, metric, dim, n, m_c, ef_c, |A|

DEFAULT_ALPHAS = (1.0, 1.2, 1.4, 1.6, 1.8, 2.0)

_build_calls = 0


def build_calls() -> int:
    """Number of times :func:`build_index` has run in this process."""
    return _build_calls


@dataclass(frozen=True)
class BuildParams:
    m_c: int = 16
    ef_c: int = 64
    alphas: Tuple[float, ...] = DEFAULT_ALPHAS

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if self.m_c < 1:
            raise ValueError("m_c must be positive")
        if self.ef_c < self.m_c:
            raise ValueError(f"ef_c ({self.ef_c}) must be >= m_c ({self.m_c})")
        if not alphas:
            raise ValueError("pruning rates must be non-empty")
        if alphas[0] < 1.0:
            raise ValueError("pruning rates must be >= 1.0")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError("pruning rates must be strictly ascending")


@dataclass(frozen=True)
class NeighborCandidate:
    id: int
    dist: float


@dataclass
class GraphIndex:
    """Adjacency lists sorted by construction distance, with per-edge labels.

    ``dists[i][p]`` is the cached squared distance between node ``i`` and its
    ``p``-th neighbor, rounded to float32 (the on-disk precision).
    """

    neighbors: List[List[int]]
    labels: List[List[float]]
    dists: List[List[float]]
    dim: int
    params: BuildParams
    metric: Metric = Metric.L2
    entry_points: List[int] = field(default_factory=lambda: [0])

    @property
    def n(self) -> int:
        return len(self.neighbors)

    @property
    def m_c(self) -> int:
        return self.params.m_c

    @property
    def alphas(self) -> Tuple[float, ...]:
        return self.params.alphas

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    def edges(self, alpha: Optional[float] = None, m: Optional[int] = None) -> List[List[int]]:
        """Per-node adjacency of the graph emulated by ``(alpha, m)``."""
        alpha = self.alphas[-1] if alpha is None else alpha
        m = self.m_c if m is None else m
        return [filtered_neighbors(self, i, alpha, m) for i in range(self.n)]

    def in_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for nbrs in self.neighbors:
            for j in nbrs:
                deg[j] += 1
        return deg

    def to_bytes(self) -> bytes:
        return serialize_index(self)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(serialize_index(self))

    @classmethod
    def load(cls, path) -> "GraphIndex":
        with open(path, "rb") as fh:
            return deserialize_index(fh.read())


# -- labeling -----------------------------------------------------------------


def prune_based_labeling(ann_ids: Sequence[int], ann_dists: Sequence[float],
                         alphas: Sequence[float], m_c: int, r: int = 0, *,
                         vectors: np.ndarray,
                         labels: Optional[Sequence[float]] = None,
                         ) -> Tuple[List[int], List[float], List[float]]:
    """Assign every candidate edge the smallest pruning rate that keeps it.

    ``ann_ids``/``ann_dists`` are the candidate neighbors in ascending order
    of their (squared) distance to the node. Positions ``< r`` keep the labels
    passed in ``labels``; positions ``>= r`` are recomputed. For each rate in
    ascending order, an unlabeled candidate ``j`` is pruned iff some earlier
    candidate ``k`` with ``0 < L[k] <= rate`` satisfies
    ``rate * dist(j, k) <= dist(node, j)`` (non-squared distances). Labeling
    stops once ``m_c`` edges carry a label; unlabeled candidates are dropped.

    Returns the kept ids, their labels and their cached distances.
    """
    n = len(ann_ids)
    if len(ann_dists) != n:
        raise ValueError("ids and distances differ in length")
    if not 0 <= r <= n:
        raise ValueError(f"insertion position r={r} outside [0, {n}]")
    if any(b < a for a, b in zip(ann_dists, ann_dists[1:])):
        raise ValueError("candidates must be sorted by ascending distance")
    if r > 0 and (labels is None or len(labels) < r):
        raise ValueError("labels for the first r positions are required when r > 0")

    lab = [float(x) for x in labels[:r]] if r else []
    lab.extend([0.0] * (n - r))
    count = r
    if n == 0 or count >= m_c:
        keep = [p for p in range(min(n, m_c)) if lab[p] != 0.0]
        return ([ann_ids[p] for p in keep], [lab[p] for p in keep],
                [float(ann_dists[p]) for p in keep])

    root_t = [math.sqrt(max(t, 0.0)) for t in ann_dists]
    pts = vectors[list(ann_ids)]
    diff = pts[:, None, :] - pts[None, :, :]
    # non-squared pairwise distances between candidates
    pair = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).tolist()

    # labeled positions in ascending order, with their distance rows
    labeled = [p for p in range(r) if lab[p] > 0.0]
    cols = [pair[p] for p in labeled]
    for alpha in alphas:
        if count >= m_c:
            break
        for j in range(r, n):
            if count >= m_c:
                break
            if lab[j] != 0.0:
                continue
            limit = root_t[j]
            pruned = False
            for k, col in zip(labeled, cols):
                if k >= j:
                    break
                if lab[k] <= alpha and alpha * col[j] <= limit:
                    pruned = True
                    break
            if not pruned:
                lab[j] = alpha
                count += 1
                pos = bisect_right(labeled, j)
                labeled.insert(pos, j)
                cols.insert(pos, pair[j])

    keep = [p for p in range(n) if lab[p] != 0.0][:m_c]
    return ([ann_ids[p] for p in keep], [lab[p] for p in keep],
            [float(ann_dists[p]) for p in keep])


# -- construction -------------------------------------------------------------


def _construction_search(G, L, X: np.ndarray, q: np.ndarray, ef: int, m: int,
                         alpha: float, entry: int = 0) -> CandidatePool:
    """Greedy beam search over the partial graph with exact distances."""
    pool = CandidatePool(ef)
    diff = X[entry] - q
    pool.insert(float(diff @ diff), entry)
    visited = {entry}
    while True:
        item = pool.pop_nearest_unexpanded()
        if item is None:
            return pool
        node = item[1]
        batch = []
        for j, lab in zip(G[node], L[node]):
            if j not in visited and lab <= alpha:
                batch.append(j)
                visited.add(j)
                if len(batch) >= m:
                    break
        if batch:
            diff = X[batch] - q
            for d, j in zip(np.einsum("ij,ij->i", diff, diff).tolist(), batch):
                pool.insert(d, j)


def build_index(dataset: Union[Dataset, ArrayLike], params: BuildParams = BuildParams(),
                metric: Union[str, Metric] = Metric.L2,
                trace: Optional[list] = None) -> GraphIndex:
    """Insert points in id order, labeling forward and reverse edges.

    If ``trace`` is a list, ``(i, ann_ids, ann_dists)`` is appended for every
    inserted point: the candidate list that was fed to the initial labeling.
    """
    global _build_calls
    ds = as_dataset(dataset)
    if len(ds) == 0:
        raise ValueError("cannot build an index over an empty dataset")
    _build_calls += 1
    X = ds.f64
    n = len(ds)
    A = params.alphas
    m_c = params.m_c
    G: List[List[int]] = [[] for _ in range(n)]
    L: List[List[float]] = [[] for _ in range(n)]
    T: List[List[float]] = [[] for _ in range(n)]

    for i in range(1, n):
        pool = _construction_search(G, L, X, X[i], params.ef_c, m_c, A[-1])
        ann = pool.items()
        ann_ids = [j for _, j in ann]
        ann_d = [d for d, _ in ann]
        if trace is not None:
            trace.append((i, ann_ids, ann_d))
        G[i], L[i], T[i] = prune_based_labeling(ann_ids, ann_d, A, m_c, 0, vectors=X)

        for j, t in zip(G[i], T[i]):
            Gj, Tj = G[j], T[j]
            if len(Gj) >= m_c and t >= Tj[-1]:
                continue
            r = bisect_right(Tj, t)
            G[j], L[j], T[j] = prune_based_labeling(
                Gj[:r] + [i] + Gj[r:], Tj[:r] + [t] + Tj[r:], A, m_c, r,
                vectors=X, labels=L[j][:r])

    T32 = [np.asarray(t, dtype=np.float32).tolist() for t in T]
    return GraphIndex(neighbors=G, labels=L, dists=T32, dim=ds.dim, params=params,
                      metric=Metric.parse(metric), entry_points=[0])


# -- runtime edge selection -----------------------------------------------------


def filtered_positions(index: GraphIndex, i: int, alpha_s: float, m_s: int,
                       visited: Iterable[int] = ()) -> List[int]:
    """Positions within ``G_i`` selected by :func:`filtered_neighbors`."""
    if not 0 <= i < index.n:
        raise IndexError(f"unknown node id {i} (index has {index.n} nodes)")
    out = []
    for p, (j, lab) in enumerate(zip(index.neighbors[i], index.labels[i])):
        if j not in visited and lab <= alpha_s:
            out.append(p)
            if len(out) >= m_s:
                break
    return out


def filtered_neighbors(index: GraphIndex, i: int, alpha_s: float, m_s: int,
                       visited: Iterable[int] = ()) -> List[int]:
    """Unvisited neighbors of ``i`` whose label is ``<= alpha_s``, at most ``m_s``.

    Touches only ids and labels, never vector data.
    """
    nbrs = index.neighbors[i] if 0 <= i < index.n else None
    return [nbrs[p] for p in filtered_positions(index, i, alpha_s, m_s, visited)]


def reachable_from(index: GraphIndex, entry: int = 0, alpha: Optional[float] = None,
                   m: Optional[int] = None) -> np.ndarray:
    """Boolean mask of nodes reachable from ``entry`` in the emulated graph."""
    adj = index.edges(alpha, m)
    seen = np.zeros(index.n, dtype=bool)
    seen[entry] = True
    stack = [entry]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return seen


# -- serialization --------------------------------------------------------------


def serialize_index(index: GraphIndex) -> bytes:
    p = index.params
    parts = [_HEAD.pack(INDEX_MAGIC, INDEX_VERSION, index.metric.code, index.dim,
                        index.n, p.m_c, p.ef_c, len(p.alphas)),
             np.asarray(p.alphas, dtype="<f8").tobytes(),
             struct.pack("<I", len(index.entry_points)),
             np.asarray(index.entry_points, dtype="<u4").tobytes()]
    for ids, labs, ds in zip(index.neighbors, index.labels, index.dists):
        parts.append(struct.pack("<I", len(ids)))
        parts.append(np.asarray(ids, dtype="<u4").tobytes())
        parts.append(np.asarray(labs, dtype="<f4").tobytes())
        parts.append(np.asarray(ds, dtype="<f4").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.off = 0

    def take(self, nbytes: int) -> bytes:
        end = self.off + nbytes
        if end > len(self.blob):
            raise ValueError(f"index file truncated at byte {self.off}")
        out = self.blob[self.off:end]
        self.off = end
        return out

    def array(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize * count
        return np.frombuffer(self.take(size), dtype=dtype, count=count)


def deserialize_index(blob: bytes) -> GraphIndex:
    rd = _Reader(blob)
    magic, version, metric, dim, n, m_c, ef_c, n_alpha = _HEAD.unpack(rd.take(_HEAD.size))
    if magic != INDEX_MAGIC:
        raise ValueError(f"bad index magic {magic!r}")
    if version != INDEX_VERSION:
        raise ValueError(f"unsupported index version {version}")
    alphas = tuple(rd.array("<f8", n_alpha).tolist())
    params = BuildParams(m_c=m_c, ef_c=ef_c, alphas=alphas)
    by_f32 = {float(np.float32(a)): a for a in alphas}
    (n_entry,) = struct.unpack("<I", rd.take(4))
    entry = rd.array("<u4", n_entry).tolist()
    G, L, T = [], [], []
    for _ in range(n):
        (deg,) = struct.unpack("<I", rd.take(4))
        G.append(rd.array("<u4", deg).tolist())
        try:
            L.append([by_f32[x] for x in rd.array("<f4", deg).tolist()])
        except KeyError as exc:
            raise ValueError(f"edge label {exc.args[0]} is not a pruning rate") from None
        T.append(rd.array("<f4", deg).tolist())
    if rd.off != len(blob):
        raise ValueError(f"{len(blob) - rd.off} trailing bytes after index payload")
    if any(j >= n for ids in G for j in ids) or any(e >= n for e in entry):
        raise ValueError("node id out of range")
    return GraphIndex(neighbors=G, labels=L, dists=T, dim=dim, params=params,
                      metric=Metric.from_code(metric), entry_points=entry)
