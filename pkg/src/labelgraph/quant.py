"""Truncated scalar quantization.

Each dimension is mapped onto ``2**bits`` evenly spaced levels between a
truncated lower and upper bound. The bounds come from order statistics
rather than the raw min/max, so a handful of outliers cannot stretch the
range and waste most of the levels.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import ArrayLike, Dataset, Metric, as_dataset, as_vector

CODE_MAGIC = b"VSQC"
CODE_VERSION = 1
_HEADER = struct.Struct("<4sIIIQ")


def order_statistic(values: np.ndarray, q: float) -> np.ndarray:
    """Per-column sorted element at index ``floor(q * (n - 1))``, no interpolation."""
    n = values.shape[0]
    idx = int(math.floor(q * (n - 1)))
    return np.sort(values, axis=0)[idx]


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True, eq=False)
class QuantizerModel:
    bits: int
    lower: np.ndarray  # float32, per dimension
    upper: np.ndarray  # float32, per dimension
    quantile: Optional[float] = None  # not stored in code files

    def __post_init__(self):
        if self.bits not in (4, 8):
            raise ValueError(f"bits must be 4 or 8, got {self.bits}")
        lower = np.ascontiguousarray(self.lower, dtype=np.float32)
        upper = np.ascontiguousarray(self.upper, dtype=np.float32)
        if lower.shape != upper.shape or lower.ndim != 1 or lower.size == 0:
            raise ValueError("lower/upper must be equal-length non-empty 1-d arrays")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def __eq__(self, other):
        if not isinstance(other, QuantizerModel):
            return NotImplemented
        return (self.bits == other.bits
                and np.array_equal(self.lower, other.lower)
                and np.array_equal(self.upper, other.upper))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def levels(self) -> int:
        return (1 << self.bits) - 1

    @property
    def code_len(self) -> int:
        return (self.dim * self.bits + 7) // 8

    @property
    def step(self) -> np.ndarray:
        """Width of one quantization interval per dimension (0 for constant dims)."""
        return (self.upper.astype(np.float64) - self.lower.astype(np.float64)) / self.levels

    def error_bound(self) -> float:
        """Worst-case squared reconstruction error for in-range vectors."""
        half = self.step / 2.0
        return float(half @ half)

    # -- per-vector codes -------------------------------------------------

    def quantize(self, x: np.ndarray) -> np.ndarray:
        """Unpacked integer levels (uint8) for one vector or a batch of rows."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValueError(f"dimension mismatch: got {x.shape[-1]}, expected {self.dim}")
        lo = self.lower.astype(np.float64)
        width = self.upper.astype(np.float64) - lo
        clamped = np.clip(x, lo, self.upper.astype(np.float64))
        safe = np.where(width > 0, width, 1.0)
        scaled = (clamped - lo) / safe * self.levels
        codes = round_half_away(scaled)
        codes = np.where(width > 0, codes, 0.0)
        return codes.astype(np.uint8)

    def dequantize(self, levels: np.ndarray) -> np.ndarray:
        levels = np.asarray(levels, dtype=np.float64)
        return self.lower.astype(np.float64) + levels * self.step

    def pack(self, levels: np.ndarray) -> np.ndarray:
        levels = np.asarray(levels, dtype=np.uint8)
        if self.bits == 8:
            return levels.copy()
        if levels.shape[-1] % 2:
            pad = np.zeros(levels.shape[:-1] + (1,), dtype=np.uint8)
            levels = np.concatenate([levels, pad], axis=-1)
        return (levels[..., 0::2] | (levels[..., 1::2] << 4)).astype(np.uint8)

    def unpack(self, packed: np.ndarray) -> np.ndarray:
        packed = np.asarray(packed, dtype=np.uint8)
        if packed.shape[-1] != self.code_len:
            raise ValueError(f"code length mismatch: got {packed.shape[-1]} bytes, "
                             f"expected {self.code_len}")
        if self.bits == 8:
            return packed
        out = np.empty(packed.shape[:-1] + (2 * packed.shape[-1],), dtype=np.uint8)
        out[..., 0::2] = packed & 0x0F
        out[..., 1::2] = packed >> 4
        return out[..., : self.dim]


def train_quantizer(dataset: Union[Dataset, ArrayLike], bits: int = 8,
                    quantile: float = 0.99) -> QuantizerModel:
    """Fit per-dimension truncated bounds.

    ``lower`` is the ``1 - quantile`` order statistic of each dimension and
    ``upper`` the ``quantile`` one. ``quantile=1.0`` gives plain min/max
    scalar quantization.
    """
    ds = as_dataset(dataset)
    if len(ds) == 0:
        raise ValueError("cannot train a quantizer on an empty dataset")
    if bits not in (4, 8):
        raise ValueError(f"bits must be 4 or 8, got {bits}")
    if not (0.5 < quantile <= 1.0):
        raise ValueError(f"quantile must lie in (0.5, 1.0], got {quantile}")
    x = ds.vectors
    lower = order_statistic(x, 1.0 - quantile)
    upper = order_statistic(x, quantile)
    return QuantizerModel(bits=bits, lower=lower, upper=upper, quantile=quantile)


def encode(model: QuantizerModel, v: ArrayLike) -> bytes:
    """Packed code bytes for a single vector."""
    vec = as_vector(v, model.dim)
    return model.pack(model.quantize(vec)).tobytes()


def decode(model: QuantizerModel, code: bytes) -> np.ndarray:
    packed = np.frombuffer(bytes(code), dtype=np.uint8)
    return model.dequantize(model.unpack(packed))


class CodeStore:
    """Packed codes for a whole dataset plus the derived tables used at search time."""

    def __init__(self, model: QuantizerModel, packed: np.ndarray):
        packed = np.ascontiguousarray(packed, dtype=np.uint8)
        if packed.ndim != 2 or packed.shape[1] != model.code_len:
            raise ValueError(f"packed codes must have shape (count, {model.code_len})")
        packed.setflags(write=False)
        self.model = model
        self.codes = packed
        self.levels = model.unpack(packed)
        step = model.step
        # sum_d (level_d * step_d)^2, the code-side half of the decomposed distance
        scaled = self.levels * step
        self.code_norms = np.einsum("ij,ij->i", scaled, scaled)

    @classmethod
    def encode_dataset(cls, model: QuantizerModel, dataset: Union[Dataset, ArrayLike]) -> "CodeStore":
        ds = as_dataset(dataset)
        if ds.dim != model.dim:
            raise ValueError(f"dimension mismatch: dataset {ds.dim}, model {model.dim}")
        return cls(model, model.pack(model.quantize(ds.f64)))

    @property
    def count(self) -> int:
        return self.codes.shape[0]

    @property
    def code_len_bytes(self) -> int:
        return self.model.code_len

    def code(self, i: int) -> bytes:
        return self.codes[i].tobytes()

    def decoded(self, ids=slice(None)) -> np.ndarray:
        return self.model.dequantize(self.levels[ids])

    def __eq__(self, other):
        if not isinstance(other, CodeStore):
            return NotImplemented
        return self.model == other.model and np.array_equal(self.codes, other.codes)

    # -- serialization ----------------------------------------------------

    def to_bytes(self) -> bytes:
        m = self.model
        header = _HEADER.pack(CODE_MAGIC, CODE_VERSION, m.bits, m.dim, self.count)
        return b"".join([header, m.lower.astype("<f4").tobytes(),
                         m.upper.astype("<f4").tobytes(), self.codes.tobytes()])

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CodeStore":
        if len(blob) < _HEADER.size:
            raise ValueError("code file truncated: incomplete header")
        magic, version, bits, dim, count = _HEADER.unpack_from(blob, 0)
        if magic != CODE_MAGIC:
            raise ValueError(f"bad code file magic {magic!r}")
        if version != CODE_VERSION:
            raise ValueError(f"unsupported code file version {version}")
        code_len = (dim * bits + 7) // 8
        expected = _HEADER.size + 8 * dim + count * code_len
        if len(blob) != expected:
            raise ValueError(f"code file has {len(blob)} bytes, expected {expected}")
        off = _HEADER.size
        lower = np.frombuffer(blob, "<f4", dim, off)
        upper = np.frombuffer(blob, "<f4", dim, off + 4 * dim)
        codes = np.frombuffer(blob, np.uint8, count * code_len, off + 8 * dim)
        model = QuantizerModel(bits=bits, lower=lower, upper=upper)
        return cls(model, codes.reshape(count, code_len))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "CodeStore":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


class LowPrecQuery:
    """A full-precision query prepared for asymmetric distances to codes.

    With ``u = q - lower`` and decoded value ``lower + level * step``,
    ``|q - decoded|^2 = |u|^2 - 2 sum(level * step * u) + sum((level * step)^2)``.
    The last term is cached per code in :class:`CodeStore`, so each
    candidate costs one integer-weighted dot product.
    """

    def __init__(self, model: QuantizerModel, q: ArrayLike, metric: Metric = Metric.L2):
        self.model = model
        self.metric = Metric.parse(metric)
        self.query = as_vector(q, model.dim)
        lower = model.lower.astype(np.float64)
        step = model.step
        if self.metric is Metric.L2:
            u = self.query - lower
            self.weights = step * u
            self.offset = float(u @ u)
        else:
            self.weights = -step * self.query
            self.offset = -float(self.query @ lower)

    def distances(self, levels: np.ndarray, code_norms: np.ndarray) -> np.ndarray:
        """Batch form over unpacked levels; ``code_norms`` from the store."""
        dots = levels @ self.weights
        if self.metric is Metric.L2:
            return self.offset - 2.0 * dots + code_norms
        return self.offset + dots


def prepare_query_lowprec(model: QuantizerModel, q: ArrayLike,
                          metric: Union[str, Metric] = Metric.L2) -> LowPrecQuery:
    return LowPrecQuery(model, q, Metric.parse(metric))


def lowprec_distance(lpq: LowPrecQuery, code: bytes) -> float:
    model = lpq.model
    levels = model.unpack(np.frombuffer(bytes(code), dtype=np.uint8)).astype(np.float64)
    scaled = levels * model.step
    return float(lpq.distances(levels[None, :], np.array([scaled @ scaled]))[0])
