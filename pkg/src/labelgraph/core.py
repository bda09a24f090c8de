"""Vector containers, metrics and the exact/decomposed distance kernels."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

ArrayLike = Union[np.ndarray, Sequence[float]]


class Metric(str, enum.Enum):
    """Distance metric. Every metric is arranged so that smaller means nearer."""

    L2 = "l2"  # squared euclidean
    IP = "ip"  # negated inner product

    @classmethod
    def parse(cls, value: Union[str, "Metric"]) -> "Metric":
        if isinstance(value, Metric):
            return value
        aliases = {"l2": cls.L2, "sqeuclidean": cls.L2, "euclidean": cls.L2,
                   "ip": cls.IP, "inner_product": cls.IP, "dot": cls.IP}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown metric {value!r}") from None

    @property
    def code(self) -> int:
        return 0 if self is Metric.L2 else 1

    @classmethod
    def from_code(cls, code: int) -> "Metric":
        if code == 0:
            return cls.L2
        if code == 1:
            return cls.IP
        raise ValueError(f"unknown metric code {code}")


def as_vector(v: ArrayLike, dim: int | None = None) -> np.ndarray:
    """Return ``v`` as a finite 1-d float64 array, optionally checking its length."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"dimension mismatch: got {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector contains NaN or Inf")
    return arr


class Dataset:
    """A dense, immutable collection of equal-length float32 vectors.

    Ids are the implicit 0-based row positions. A float64 copy is kept
    alongside the float32 storage because every distance kernel accumulates
    in double precision.
    """

    def __init__(self, vectors: ArrayLike, dim: int | None = None):
        arr = np.asarray(vectors, dtype=np.float32)
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, dim or 0)
        if arr.ndim != 2:
            raise ValueError(f"dataset must be 2-d, got shape {arr.shape}")
        if dim is not None and arr.shape[1] != dim:
            raise ValueError(f"dimension mismatch: got {arr.shape[1]}, expected {dim}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("dataset contains NaN or Inf")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        self._vectors = arr
        self._f64 = arr.astype(np.float64)
        self._f64.setflags(write=False)

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def f64(self) -> np.ndarray:
        return self._f64

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    def __len__(self) -> int:
        return self._vectors.shape[0]

    def __getitem__(self, i):
        return self._f64[i]

    def __repr__(self) -> str:
        return f"Dataset(n={len(self)}, dim={self.dim})"


def as_dataset(data: Union[Dataset, ArrayLike]) -> Dataset:
    return data if isinstance(data, Dataset) else Dataset(data)


@dataclass(frozen=True)
class PreparedQuery:
    """A query with its squared norm computed once, ahead of the search."""

    query: np.ndarray
    query_norm_sq: float
    metric: Metric = Metric.L2

    @classmethod
    def prepare(cls, q: ArrayLike, metric: Union[str, Metric] = Metric.L2) -> "PreparedQuery":
        v = as_vector(q)
        return cls(query=v, query_norm_sq=float(v @ v), metric=Metric.parse(metric))

    @property
    def dim(self) -> int:
        return self.query.shape[0]


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def exact_distance(a: ArrayLike, b: ArrayLike, metric: Union[str, Metric] = Metric.L2) -> float:
    """High-precision distance between two vectors.

    Squared euclidean returns ``sum((a - b)**2)``; inner product returns
    ``-(a . b)`` so that smaller is always nearer.
    """
    a = as_vector(a)
    b = as_vector(b)
    _check_dims(a, b)
    if Metric.parse(metric) is Metric.L2:
        diff = a - b
        return float(diff @ diff)
    return -float(a @ b)


def batch_exact_distance(base: np.ndarray, q: np.ndarray, metric: Metric = Metric.L2) -> np.ndarray:
    """Exact distances from ``q`` to every row of ``base`` (both float64)."""
    _check_dims(base, q)
    if metric is Metric.L2:
        diff = base - q
        return np.einsum("ij,ij->i", diff, diff)
    return -(base @ q)


def precompute_base_norms(dataset: Union[Dataset, ArrayLike]) -> np.ndarray:
    """Squared L2 norm of every base vector."""
    ds = as_dataset(dataset)
    if len(ds) == 0:
        raise ValueError("cannot compute norms of an empty dataset")
    x = ds.f64
    return np.einsum("ij,ij->i", x, x)


def decomposed_distance(prepared: PreparedQuery, base: ArrayLike, base_norm_sq: float) -> float:
    """Squared euclidean distance as ``|b|^2 + |q|^2 - 2 b.q`` from cached norms.

    For the inner-product metric the norms are irrelevant and ``-(b.q)`` is
    returned.
    """
    b = as_vector(base)
    _check_dims(b, prepared.query)
    dot = float(b @ prepared.query)
    if prepared.metric is Metric.IP:
        return -dot
    return base_norm_sq + prepared.query_norm_sq - 2.0 * dot


def batch_decomposed_distance(base: np.ndarray, base_norms: np.ndarray,
                              prepared: PreparedQuery) -> np.ndarray:
    dots = base @ prepared.query
    if prepared.metric is Metric.IP:
        return -dots
    return base_norms + prepared.query_norm_sq - 2.0 * dots
