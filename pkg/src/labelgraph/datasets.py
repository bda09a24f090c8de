"""fvecs/ivecs I/O and seeded synthetic datasets.

Both formats are a sequence of records, each a little-endian int32 length
followed by that many little-endian float32 (fvecs) or int32 (ivecs) values.
"""

from __future__ import annotations

import os
from typing import List, Sequence, Tuple, Union

import numpy as np

from .core import Dataset, as_dataset


def _read_records(blob: bytes, kind: str) -> List[np.ndarray]:
    payload_dtype = "<f4" if kind == "fvecs" else "<i4"
    records = []
    off = 0
    size = len(blob)
    index = 0
    while off < size:
        if off + 4 > size:
            raise ValueError(f"{kind} record {index}: truncated length field")
        dim = int(np.frombuffer(blob, "<i4", 1, off)[0])
        if dim < 0:
            raise ValueError(f"{kind} record {index}: negative dimension {dim}")
        off += 4
        end = off + 4 * dim
        if end > size:
            raise ValueError(f"{kind} record {index}: truncated payload")
        records.append(np.frombuffer(blob, payload_dtype, dim, off))
        off = end
        index += 1
    return records


def read_fvecs(path: Union[str, os.PathLike]) -> Dataset:
    with open(path, "rb") as fh:
        records = _read_records(fh.read(), "fvecs")
    if not records:
        return Dataset(np.zeros((0, 0), dtype=np.float32))
    dim = records[0].shape[0]
    for i, rec in enumerate(records):
        if rec.shape[0] != dim:
            raise ValueError(f"fvecs record {i} has dimension {rec.shape[0]}, expected {dim}")
    return Dataset(np.stack(records))


def write_fvecs(data: Union[Dataset, np.ndarray], path: Union[str, os.PathLike]) -> None:
    x = as_dataset(data).vectors if not isinstance(data, np.ndarray) else np.asarray(data, np.float32)
    if x.ndim != 2:
        raise ValueError("fvecs data must be 2-d")
    n, d = x.shape
    out = np.empty((n, d + 1), dtype="<f4")
    out[:, 0] = np.full(n, d, dtype="<i4").view("<f4")
    out[:, 1:] = x
    with open(path, "wb") as fh:
        fh.write(out.tobytes())


def read_ivecs(path: Union[str, os.PathLike]) -> List[List[int]]:
    with open(path, "rb") as fh:
        records = _read_records(fh.read(), "ivecs")
    out = []
    for i, rec in enumerate(records):
        if np.any(rec < 0):
            raise ValueError(f"ivecs record {i} contains a negative id")
        out.append(rec.tolist())
    return out


def write_ivecs(rows: Sequence[Sequence[int]], path: Union[str, os.PathLike]) -> None:
    parts = []
    for row in rows:
        arr = np.asarray(row, dtype="<i4")
        if np.any(arr < 0):
            raise ValueError("ivecs ids must be non-negative")
        parts.append(np.int32(arr.shape[0]).astype("<i4").tobytes())
        parts.append(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


# -- synthetic data ----------------------------------------------------------------


def uniform(n: int, dim: int, seed: int = 0, low: float = -1.0, high: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(low, high, size=(n, dim)).astype(np.float32)


def clustered(n: int, dim: int, n_clusters: int = 16, seed: int = 0,
              spread: float = 0.5, n_queries: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Gaussian-mixture base vectors plus queries drawn from the same mixture."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-1.0, 1.0, size=(n_clusters, dim))

    def draw(count: int) -> np.ndarray:
        which = rng.integers(0, n_clusters, size=count)
        return (centers[which] + spread * rng.standard_normal((count, dim))).astype(np.float32)

    return draw(n), draw(n_queries)


def sample_rows(data: Union[Dataset, np.ndarray], count: int, seed: int = 0) -> np.ndarray:
    """Rows drawn without replacement, e.g. base vectors reused as tuning queries."""
    x = data.vectors if isinstance(data, Dataset) else np.asarray(data, np.float32)
    rng = np.random.default_rng(seed)
    idx = rng.choice(x.shape[0], size=min(count, x.shape[0]), replace=False)
    return x[np.sort(idx)]
