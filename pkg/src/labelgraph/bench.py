"""Recall/throughput sweeps driven by a single config object."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import Metric
from .datasets import read_fvecs, read_ivecs
from .evaluation import brute_force_groundtruth, mean_recall
from .graph import DEFAULT_ALPHAS, BuildParams, GraphIndex, build_index
from .quant import CodeStore, train_quantizer
from .search import (EnvParams, PrsStore, QuantizedStore, SearchParams, VectorStore,
                     greedy_search)
from .tune.elp import ElpGrid, tune_elp

log = logging.getLogger(__name__)

CSV_COLUMNS = ("ef_s", "m_s", "alpha_s", "recall_at_k", "qps", "mean_hops",
               "n_lp", "n_hp", "t_lp", "t_hp")


class StageError(RuntimeError):
    """A benchmark step failed; ``stage`` names which one."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage} failed: {cause}")
        self.stage = stage


@dataclass
class BenchConfig:
    base: str = ""
    queries: str = ""
    groundtruth: Optional[str] = None
    metric: str = "l2"
    m_c: int = 16
    ef_c: int = 64
    alphas: List[float] = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    ef_s: List[int] = field(default_factory=lambda: [64])
    # None means the index's own limit
    m_s: List[Optional[int]] = field(default_factory=lambda: [None])
    alpha_s: List[Optional[float]] = field(default_factory=lambda: [None])
    bits: int = 0  # 0 searches full-precision vectors
    quantile: float = 0.99
    rerank: float = 3.0
    strides: List[int] = field(default_factory=lambda: [0])
    depths: List[int] = field(default_factory=lambda: [1])
    delta: float = 0.0
    k: int = 10
    index: Optional[str] = None
    output: str = "bench"
    tune_env: bool = False

    def validate(self) -> None:
        for name in ("base", "queries"):
            path = getattr(self, name)
            if not path or not os.path.isfile(path):
                raise ValueError(f"{name} file not readable: {path!r}")
        if self.groundtruth and not os.path.isfile(self.groundtruth):
            raise ValueError(f"ground-truth file not readable: {self.groundtruth!r}")
        for name in ("ef_s", "m_s", "alpha_s", "alphas", "strides", "depths"):
            if not getattr(self, name):
                raise ValueError(f"{name} grid is empty")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.bits not in (0, 4, 8):
            raise ValueError("bits must be 0 (no quantization), 4 or 8")
        if self.delta and not self.bits:
            raise ValueError("redundant code blocks need a quantizer (bits 4 or 8)")
        Metric.parse(self.metric)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BenchConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "BenchConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def override(self, **changes) -> "BenchConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


@dataclass
class CostBreakdown:
    n_lp: float
    n_hp: float
    t_lp: float
    t_hp: float

    @property
    def total_cost(self) -> float:
        return self.n_lp * self.t_lp + self.n_hp * self.t_hp

    def to_dict(self) -> Dict[str, float]:
        return {**dataclasses.asdict(self), "total_cost": self.total_cost}


@dataclass
class ReportRow:
    ef_s: int
    m_s: int
    alpha_s: float
    recall_at_k: float
    qps: float
    mean_hops: float
    cost: CostBreakdown

    def csv_row(self) -> Dict[str, Any]:
        return {"ef_s": self.ef_s, "m_s": self.m_s, "alpha_s": self.alpha_s,
                "recall_at_k": self.recall_at_k, "qps": self.qps, "mean_hops": self.mean_hops,
                "n_lp": self.cost.n_lp, "n_hp": self.cost.n_hp,
                "t_lp": self.cost.t_lp, "t_hp": self.cost.t_hp}


@dataclass
class RecallReport:
    rows: List[ReportRow]
    k: int
    env: EnvParams = EnvParams()
    meta: Dict[str, Any] = field(default_factory=dict)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            w.writeheader()
            for r in self.rows:
                w.writerow(r.csv_row())

    def to_dict(self) -> Dict[str, Any]:
        return {"k": self.k, "env": dataclasses.asdict(self.env), "meta": self.meta,
                "rows": [{**{k: v for k, v in r.csv_row().items() if k not in ("n_lp", "n_hp",
                                                                               "t_lp", "t_hp")},
                          "cost": r.cost.to_dict()} for r in self.rows]}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def unit_costs(store: VectorStore, queries: np.ndarray, samples: int = 2000,
               seed: int = 0) -> Tuple[float, float]:
    """Mean seconds per low- and high-precision distance evaluation."""
    rng = np.random.default_rng(seed)
    ids = rng.integers(0, len(store), size=min(samples, len(store))).tolist()
    q = np.asarray(queries[0], dtype=np.float64)
    pq = store.prepare(q)
    start = time.perf_counter()
    store.distances(pq, ids)
    t_lp = (time.perf_counter() - start) / len(ids)
    start = time.perf_counter()
    store.exact(q, ids)
    t_hp = (time.perf_counter() - start) / len(ids)
    return t_lp, t_hp


def evaluate(index: GraphIndex, store: VectorStore, queries: np.ndarray,
             truth: Sequence[Sequence[int]], params: SearchParams, env: EnvParams,
             t_lp: float = 0.0, t_hp: float = 0.0) -> ReportRow:
    """Recall, throughput (after one warm-up pass) and per-query costs of one setting."""
    for q in queries:
        greedy_search(index, store, q, params, env)
    start = time.perf_counter()
    results = [greedy_search(index, store, q, params, env) for q in queries]
    secs = time.perf_counter() - start
    nq = len(queries)
    m_s, alpha_s = params.resolve(index)
    return ReportRow(
        ef_s=params.ef_s, m_s=m_s, alpha_s=alpha_s,
        recall_at_k=mean_recall([r.ids for r in results], truth, params.k),
        qps=nq / secs if secs > 0 else float("inf"),
        mean_hops=float(np.mean([r.stats.hops for r in results])),
        cost=CostBreakdown(n_lp=float(np.mean([r.stats.n_lp for r in results])),
                           n_hp=float(np.mean([r.stats.n_hp for r in results])),
                           t_lp=t_lp, t_hp=t_hp))


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise StageError(name, exc) from exc


def make_store(index: GraphIndex, base, cfg: BenchConfig) -> VectorStore:
    if not cfg.bits:
        return VectorStore(base, cfg.metric)
    model = train_quantizer(base, bits=cfg.bits, quantile=cfg.quantile)
    codes = CodeStore.encode_dataset(model, base)
    if cfg.delta > 0:
        return PrsStore(index, codes, base, cfg.delta, cfg.metric)
    return QuantizedStore(codes, base, cfg.metric)


def run_bench(cfg: BenchConfig, write: bool = True) -> RecallReport:
    """Load data, build or load the index, optionally tune prefetching, sweep the grid."""
    _stage("config", cfg.validate)
    base = _stage("read base vectors", read_fvecs, cfg.base)
    queries = _stage("read queries", read_fvecs, cfg.queries).vectors
    if len(base) == 0:
        raise StageError("read base vectors", ValueError("base file holds no vectors"))
    if cfg.groundtruth:
        truth = _stage("read ground truth", read_ivecs, cfg.groundtruth)
        if len(truth) != len(queries):
            raise StageError("read ground truth",
                             ValueError(f"{len(truth)} rows for {len(queries)} queries"))
    else:
        truth = _stage("ground truth", brute_force_groundtruth, base, queries, cfg.k,
                       cfg.metric)[0].tolist()

    if cfg.index and os.path.isfile(cfg.index):
        index = _stage("load index", GraphIndex.load, cfg.index)
        log.info("loaded index from %s", cfg.index)
    else:
        params = BuildParams(m_c=cfg.m_c, ef_c=cfg.ef_c, alphas=tuple(cfg.alphas))
        index = _stage("build index", build_index, base, params, cfg.metric)
        if cfg.index:
            _stage("save index", index.save, cfg.index)

    store = _stage("encode", make_store, index, base, cfg)
    env = EnvParams(cfg.strides[0], cfg.depths[0])
    if cfg.tune_env:
        grid = ElpGrid(tuple(cfg.strides), tuple(cfg.depths))
        env = _stage("tune prefetch", tune_elp, index, store, queries[: min(50, len(queries))],
                     grid, SearchParams(k=cfg.k, ef_s=max(cfg.ef_s)))
    t_lp, t_hp = unit_costs(store, queries)

    rows = []
    for ef in cfg.ef_s:
        for m in cfg.m_s:
            for a in cfg.alpha_s:
                params = SearchParams(k=cfg.k, ef_s=ef, m_s=m, alpha_s=a, rerank=cfg.rerank)
                rows.append(_stage(f"search (ef_s={ef}, m_s={m}, alpha_s={a})", evaluate,
                                   index, store, queries, truth, params, env, t_lp, t_hp))
    report = RecallReport(rows, cfg.k, env, meta={"n": len(base), "dim": base.dim,
                                                  "queries": len(queries),
                                                  "bits": cfg.bits, "delta": cfg.delta})
    if write:
        report.write_csv(cfg.output + ".csv")
        report.write_json(cfg.output + ".json")
    return report
