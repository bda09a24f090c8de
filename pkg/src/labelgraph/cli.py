"""Command-line entry point.

Subcommands: gen, build, encode, gt, search, bench, tune-elp, tune-ilp,
train-qlp. Options may come from a JSON file given with ``--config``;
explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import datasets
from .bench import BenchConfig, StageError, run_bench
from .evaluation import brute_force_groundtruth, mean_recall
from .graph import DEFAULT_ALPHAS, BuildParams, GraphIndex, build_index
from .quant import CodeStore, train_quantizer
from .search import (EnvParams, PrsStore, QuantizedStore, SearchParams, VectorStore,
                     greedy_search)
from .tune.elp import ElpGrid, profile_elp, best_env
from .tune.ilp import select_ilp, sweep_ilp, tuning_report, write_report
from .tune.qlp import train_qlp_model

log = logging.getLogger("labelgraph")


def _floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x]


def _ints(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x]


def _load_config(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data


def _opt(args: argparse.Namespace, cfg: Dict[str, Any], name: str, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, default)


def _store(index: GraphIndex, base, metric: str, codes_path: Optional[str], delta: float):
    if not codes_path:
        return VectorStore(base, metric)
    codes = CodeStore.load(codes_path)
    if delta > 0:
        return PrsStore(index, codes, base, delta, metric)
    return QuantizedStore(codes, base, metric)


def _truth(args, cfg, base, queries, k, metric) -> List[List[int]]:
    path = _opt(args, cfg, "groundtruth")
    if path:
        return datasets.read_ivecs(path)
    return brute_force_groundtruth(base, queries, k, metric)[0].tolist()


# -- subcommands ------------------------------------------------------------------


def cmd_gen(args, cfg) -> int:
    kind = _opt(args, cfg, "kind", "clustered")
    n, dim = _opt(args, cfg, "n", 1000), _opt(args, cfg, "dim", 16)
    nq, seed = _opt(args, cfg, "n_queries", 100), _opt(args, cfg, "seed", 0)
    if kind == "uniform":
        base = datasets.uniform(n, dim, seed)
        queries = datasets.uniform(nq, dim, seed + 1)
    else:
        base, queries = datasets.clustered(n, dim, _opt(args, cfg, "clusters", 16), seed,
                                           _opt(args, cfg, "spread", 0.5), nq)
    datasets.write_fvecs(base, args.base)
    if args.queries:
        datasets.write_fvecs(queries, args.queries)
    print(f"wrote {n} base vectors (dim {dim}) to {args.base}")
    return 0


def cmd_build(args, cfg) -> int:
    base = datasets.read_fvecs(_opt(args, cfg, "base"))
    params = BuildParams(m_c=_opt(args, cfg, "m_c", 16), ef_c=_opt(args, cfg, "ef_c", 64),
                         alphas=tuple(_opt(args, cfg, "alphas", DEFAULT_ALPHAS)))
    index = build_index(base, params, _opt(args, cfg, "metric", "l2"))
    index.save(args.output)
    print(f"built index over {index.n} vectors, mean degree "
          f"{np.mean([len(g) for g in index.neighbors]):.2f}; saved to {args.output}")
    return 0


def cmd_encode(args, cfg) -> int:
    base = datasets.read_fvecs(_opt(args, cfg, "base"))
    model = train_quantizer(base, bits=_opt(args, cfg, "bits", 8),
                            quantile=_opt(args, cfg, "quantile", 0.99))
    codes = CodeStore.encode_dataset(model, base)
    codes.save(args.output)
    print(f"encoded {codes.count} vectors at {model.bits} bits; "
          f"error bound {model.error_bound():.6g}; saved to {args.output}")
    return 0


def cmd_gt(args, cfg) -> int:
    base = datasets.read_fvecs(_opt(args, cfg, "base"))
    queries = datasets.read_fvecs(_opt(args, cfg, "queries"))
    ids, _ = brute_force_groundtruth(base, queries.vectors, _opt(args, cfg, "k", 10),
                                     _opt(args, cfg, "metric", "l2"))
    datasets.write_ivecs(ids.tolist(), args.output)
    print(f"wrote ground truth for {len(ids)} queries to {args.output}")
    return 0


def _search_setup(args, cfg):
    base = datasets.read_fvecs(_opt(args, cfg, "base"))
    queries = datasets.read_fvecs(_opt(args, cfg, "queries")).vectors
    index = GraphIndex.load(_opt(args, cfg, "index"))
    metric = _opt(args, cfg, "metric", index.metric.value)
    store = _store(index, base, metric, _opt(args, cfg, "codes"), _opt(args, cfg, "delta", 0.0))
    return base, queries, index, store, metric


def cmd_search(args, cfg) -> int:
    base, queries, index, store, metric = _search_setup(args, cfg)
    k = _opt(args, cfg, "k", 10)
    params = SearchParams(k=k, ef_s=_opt(args, cfg, "ef_s", 64), m_s=_opt(args, cfg, "m_s"),
                          alpha_s=_opt(args, cfg, "alpha_s"),
                          rerank=_opt(args, cfg, "rerank", 3.0))
    env = EnvParams(_opt(args, cfg, "stride", 0), _opt(args, cfg, "depth", 1))
    results = [greedy_search(index, store, q, params, env) for q in queries]
    if args.output:
        datasets.write_ivecs([r.ids for r in results], args.output)
    truth = _truth(args, cfg, base, queries, k, metric)
    print(f"recall@{k} = {mean_recall([r.ids for r in results], truth, k):.4f}; "
          f"mean n_lp {np.mean([r.stats.n_lp for r in results]):.1f}, "
          f"mean n_hp {np.mean([r.stats.n_hp for r in results]):.1f}")
    return 0


def cmd_bench(args, cfg) -> int:
    overrides = {name: getattr(args, name, None) for name in
                 ("base", "queries", "groundtruth", "metric", "index", "output", "k", "bits",
                  "quantile", "delta", "m_c", "ef_c")}
    for name in ("ef_s", "m_s", "strides", "depths"):
        v = getattr(args, name + "_grid", None)
        overrides[name] = _ints(v) if v else None
    for name in ("alpha_s", "alphas"):
        v = getattr(args, name + "_grid", None)
        overrides[name] = _floats(v) if v else None
    if args.tune_env:
        overrides["tune_env"] = True
    bench_cfg = BenchConfig.from_dict(cfg).override(**overrides)
    report = run_bench(bench_cfg)
    for row in report.rows:
        print(f"ef_s={row.ef_s} m_s={row.m_s} alpha_s={row.alpha_s}: "
              f"recall={row.recall_at_k:.4f} qps={row.qps:.1f}")
    print(f"wrote {bench_cfg.output}.csv and {bench_cfg.output}.json")
    return 0


def cmd_tune_elp(args, cfg) -> int:
    base, _, index, store, _ = _search_setup(args, cfg)
    grid = ElpGrid(tuple(_ints(args.strides_grid) if args.strides_grid else cfg.get("strides", [0, 2, 4, 8])),
                   tuple(_ints(args.depths_grid) if args.depths_grid else cfg.get("depths", [1, 2, 4])),
                   _opt(args, cfg, "repetitions", 3))
    sample = datasets.sample_rows(base, _opt(args, cfg, "samples", 100), _opt(args, cfg, "seed", 0))
    qps = profile_elp(index, store, sample, grid,
                      SearchParams(k=_opt(args, cfg, "k", 10), ef_s=_opt(args, cfg, "ef_s", 64)))
    env = best_env(qps)
    report = {"evaluated": [{"stride": e.prefetch_stride, "depth": e.prefetch_depth, "qps": v}
                            for e, v in qps.items()],
              "selection": {"stride": env.prefetch_stride, "depth": env.prefetch_depth}}
    _emit(report, args.output)
    return 0


def cmd_tune_ilp(args, cfg) -> int:
    base, queries, index, store, metric = _search_setup(args, cfg)
    k = _opt(args, cfg, "k", 10)
    truth = _truth(args, cfg, base, queries, k, metric)
    m_values = _ints(args.m_s_grid) if args.m_s_grid else cfg.get(
        "m_s", [m for m in (8, 16, 24, 32) if m <= index.m_c] or [index.m_c])
    alphas = _floats(args.alpha_s_grid) if args.alpha_s_grid else cfg.get("alpha_s", list(index.alphas))
    frontier = sweep_ilp(index, store, queries, truth, m_values, alphas,
                         ef_s=_opt(args, cfg, "ef_s", 64), k=k)
    min_recall = _opt(args, cfg, "min_recall")
    max_latency = _opt(args, cfg, "max_latency")
    choice = None
    if min_recall is not None or max_latency is not None:
        choice = select_ilp(frontier, min_recall=min_recall, max_latency=max_latency)
    report = tuning_report(frontier, choice)
    _emit(report, args.output)
    return 0


def cmd_train_qlp(args, cfg) -> int:
    base, queries, index, store, metric = _search_setup(args, cfg)
    k = _opt(args, cfg, "k", 10)
    truth = _truth(args, cfg, base, queries, k, metric)
    model = train_qlp_model(index, store, queries, truth,
                            target_recall=_opt(args, cfg, "target_recall", 0.9),
                            ef_low=_opt(args, cfg, "ef_low", 16),
                            ef_high=_opt(args, cfg, "ef_high", 128),
                            checkpoint_hop=_opt(args, cfg, "checkpoint_hop", 10),
                            params=SearchParams(k=k, ef_s=max(k, _opt(args, cfg, "ef_low", 16))))
    model.save(args.output)
    print(f"saved decision model to {args.output}; held-out accuracy "
          f"{model.held_out_accuracy}; degenerate={model.degenerate}")
    return 0


def _emit(report: Dict[str, Any], path: Optional[str]) -> None:
    if path:
        write_report(report, path)
        print(f"wrote tuning report to {path}")
    else:
        print(json.dumps(report, indent=2))


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="labelgraph", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON file with default options")
        sp.set_defaults(func=fn)
        return sp

    def data_args(sp, queries=True):
        sp.add_argument("--base")
        if queries:
            sp.add_argument("--queries")
        sp.add_argument("--metric", choices=["l2", "ip"])

    def search_args(sp):
        data_args(sp)
        sp.add_argument("--index")
        sp.add_argument("--codes", help="code file; omit for full-precision search")
        sp.add_argument("--delta", type=float)
        sp.add_argument("--groundtruth")
        sp.add_argument("-k", "--k", type=int)
        sp.add_argument("--ef-s", dest="ef_s", type=int)

    sp = add("gen", cmd_gen, "write a seeded synthetic dataset")
    sp.add_argument("--kind", choices=["uniform", "clustered"])
    sp.add_argument("-n", "--n", type=int)
    sp.add_argument("--dim", type=int)
    sp.add_argument("--n-queries", dest="n_queries", type=int)
    sp.add_argument("--clusters", type=int)
    sp.add_argument("--spread", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--base", required=True)
    sp.add_argument("--queries")

    sp = add("build", cmd_build, "build a labeled graph index")
    data_args(sp, queries=False)
    sp.add_argument("--m-c", dest="m_c", type=int)
    sp.add_argument("--ef-c", dest="ef_c", type=int)
    sp.add_argument("--alphas", type=_floats)
    sp.add_argument("-o", "--output", required=True)

    sp = add("encode", cmd_encode, "train a scalar quantizer and encode the base set")
    sp.add_argument("--base")
    sp.add_argument("--bits", type=int, choices=[4, 8])
    sp.add_argument("--quantile", type=float)
    sp.add_argument("-o", "--output", required=True)

    sp = add("gt", cmd_gt, "exact ground truth by exhaustive scan")
    data_args(sp)
    sp.add_argument("-k", "--k", type=int)
    sp.add_argument("-o", "--output", required=True)

    sp = add("search", cmd_search, "search queries and report recall")
    search_args(sp)
    sp.add_argument("--m-s", dest="m_s", type=int)
    sp.add_argument("--alpha-s", dest="alpha_s", type=float)
    sp.add_argument("--rerank", type=float)
    sp.add_argument("--stride", type=int)
    sp.add_argument("--depth", type=int)
    sp.add_argument("-o", "--output", help="ivecs file for result ids")

    sp = add("bench", cmd_bench, "sweep a search grid and write CSV/JSON reports")
    data_args(sp)
    sp.add_argument("--groundtruth")
    sp.add_argument("--index", help="index file to load, or to write after building")
    sp.add_argument("-k", "--k", type=int)
    sp.add_argument("--bits", type=int, choices=[0, 4, 8])
    sp.add_argument("--quantile", type=float)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--m-c", dest="m_c", type=int)
    sp.add_argument("--ef-c", dest="ef_c", type=int)
    sp.add_argument("--alphas", dest="alphas_grid")
    sp.add_argument("--ef-s", dest="ef_s_grid", help="comma-separated list")
    sp.add_argument("--m-s", dest="m_s_grid", help="comma-separated list")
    sp.add_argument("--alpha-s", dest="alpha_s_grid", help="comma-separated list")
    sp.add_argument("--strides", dest="strides_grid")
    sp.add_argument("--depths", dest="depths_grid")
    sp.add_argument("--tune-env", action="store_true")
    sp.add_argument("-o", "--output", help="output path prefix")

    sp = add("tune-elp", cmd_tune_elp, "grid-search prefetch stride and depth")
    search_args(sp)
    sp.add_argument("--strides", dest="strides_grid")
    sp.add_argument("--depths", dest="depths_grid")
    sp.add_argument("--repetitions", type=int)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("-o", "--output")

    sp = add("tune-ilp", cmd_tune_ilp, "recall/throughput frontier over (m_s, alpha_s)")
    search_args(sp)
    sp.add_argument("--m-s", dest="m_s_grid")
    sp.add_argument("--alpha-s", dest="alpha_s_grid")
    sp.add_argument("--min-recall", dest="min_recall", type=float)
    sp.add_argument("--max-latency", dest="max_latency", type=float)
    sp.add_argument("-o", "--output")

    sp = add("train-qlp", cmd_train_qlp, "train the early-termination decision model")
    search_args(sp)
    sp.add_argument("--target-recall", dest="target_recall", type=float)
    sp.add_argument("--ef-low", dest="ef_low", type=int)
    sp.add_argument("--ef-high", dest="ef_high", type=int)
    sp.add_argument("--checkpoint-hop", dest="checkpoint_hop", type=int)
    sp.add_argument("-o", "--output", required=True)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except StageError as exc:
        print(f"error in stage '{exc.stage}': {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
