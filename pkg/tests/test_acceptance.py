"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict; the lines are printed together at the
end of the pytest run (see ``conftest.pytest_terminal_summary``). Run this
file directly to execute only these checks.
"""

from __future__ import annotations

import math
import random
import sys
import time

import numpy as np
import pytest

from labelgraph.core import PreparedQuery, batch_exact_distance, decomposed_distance
from labelgraph.datasets import (clustered, read_fvecs, read_ivecs, uniform, write_fvecs,
                                 write_ivecs)
from labelgraph.evaluation import brute_force_groundtruth, mean_recall
from labelgraph.graph import (DEFAULT_ALPHAS, BuildParams, GraphIndex, build_calls,
                              build_index, filtered_neighbors, prune_based_labeling)
from labelgraph.quant import CodeStore, train_quantizer
from labelgraph.search import (EnvParams, InstrumentedStore, PrsStore, QuantizedStore,
                               SearchParams, VectorStore, greedy_search)
from labelgraph.tune import (FrontierPoint, adaptive_search, pareto_frontier, select_ilp,
                             sweep_ilp, train_qlp_model)
from workloads import planted_mixed_difficulty

RESULTS: dict = {}


def record(n: int, ok: bool, detail: str, started: float, budget: float) -> bool:
    secs = time.perf_counter() - started
    within = secs < budget
    passed = bool(ok and within)
    line = (f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail} "
            f"[{secs:.1f}s, budget {budget:.0f}s{'' if within else ' EXCEEDED'}]")
    RESULTS[n] = line
    print(line)
    return passed


def reference_prune(ids, sq_dists, pair, alpha, m):
    """Single-rate greedy pruner over a precomputed candidate distance matrix."""
    kept = []
    for p, t in enumerate(sq_dists):
        if len(kept) >= m:
            break
        dj = math.sqrt(t)
        if any(alpha * pair[k][p] <= dj for k in kept):
            continue
        kept.append(p)
    return [ids[p] for p in kept]


# -- labeling and filtering ---------------------------------------------------------


def test_criterion_01_labels_match_single_rate_pruner():
    t0 = time.perf_counter()
    m_c = 16
    checked = mismatched = 0
    worst = {}
    for seed in range(5):
        X = uniform(2000, 16, seed=seed)
        Xd = X.astype(np.float64)
        trace = []
        build_index(X, BuildParams(m_c=m_c, ef_c=64, alphas=DEFAULT_ALPHAS), trace=trace)
        for _, ann_ids, ann_d in trace:
            g, lab, _ = prune_based_labeling(ann_ids, ann_d, DEFAULT_ALPHAS, m_c, vectors=Xd)
            pts = Xd[ann_ids]
            diff = pts[:, None, :] - pts[None, :, :]
            pair = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).tolist()
            for alpha in DEFAULT_ALPHAS:
                mine = [j for j, l in zip(g, lab) if l <= alpha][:m_c]
                ref = reference_prune(ann_ids, ann_d, pair, alpha, m_c)
                checked += 1
                if mine != ref:
                    mismatched += 1
                    worst[alpha] = worst.get(alpha, 0) + 1
    detail = (f"{mismatched}/{checked} (node, rate) label sets differ from the reference "
              f"pruner; per rate {dict(sorted(worst.items()))}")
    assert record(1, mismatched == 0, detail, t0, 60)


@pytest.fixture(scope="module")
def uniform_index():
    X = uniform(2000, 16, seed=0)
    return X, build_index(X, BuildParams(m_c=16, ef_c=64))


def test_criterion_02_filter_monotonicity(uniform_index):
    t0 = time.perf_counter()
    _, idx = uniform_index
    r = random.Random(2)
    subset_fail = prefix_fail = 0
    example = None
    for _ in range(1000):
        i = r.randrange(idx.n)
        visited = set(r.sample(range(idx.n), r.randrange(0, 200)))
        a1, a2 = sorted(r.choice(idx.alphas) for _ in range(2))
        m1, m2 = sorted(r.randint(1, idx.m_c) for _ in range(2))
        m = r.randint(1, idx.m_c)
        lo = filtered_neighbors(idx, i, a1, m, visited)
        hi = filtered_neighbors(idx, i, a2, m, visited)
        if not set(lo) <= set(hi):
            subset_fail += 1
            example = example or (i, a1, a2, m)
        a = r.choice(idx.alphas)
        short = filtered_neighbors(idx, i, a, m1, visited)
        long = filtered_neighbors(idx, i, a, m2, visited)
        if long[: len(short)] != short:
            prefix_fail += 1
    detail = (f"rate-subset violations {subset_fail}/1000 (first: node, a1, a2, m_s = "
              f"{example}), degree-prefix violations {prefix_fail}/1000")
    assert record(2, subset_fail == 0 and prefix_fail == 0, detail, t0, 10)


# -- recall -----------------------------------------------------------------------


@pytest.fixture(scope="module")
def clustered_10k():
    base, queries = clustered(10_000, 32, seed=3, n_queries=100)
    t0 = time.perf_counter()
    index = build_index(base, BuildParams(m_c=16, ef_c=64))
    build_secs = time.perf_counter() - t0
    truth = brute_force_groundtruth(base, queries, 10)[0].tolist()
    params = SearchParams(k=10, ef_s=100, alpha_s=2.0)
    t0 = time.perf_counter()
    full = [greedy_search(index, VectorStore(base), q, params) for q in queries]
    search_secs = time.perf_counter() - t0
    return base, queries, index, truth, params, full, build_secs + search_secs


def test_criterion_03_full_precision_recall(clustered_10k):
    _, _, _, truth, _, full, secs = clustered_10k
    t0 = time.perf_counter() - secs
    recall = mean_recall([r.ids for r in full], truth, 10)
    assert record(3, recall >= 0.95, f"recall@10 = {recall:.4f} (need >= 0.95)", t0, 120)


def test_criterion_04_quantized_with_rerank(clustered_10k):
    base, queries, index, truth, params, full, _ = clustered_10k
    t0 = time.perf_counter()
    codes = CodeStore.encode_dataset(train_quantizer(base, bits=8, quantile=0.995), base)
    store = QuantizedStore(codes, base)
    rp = SearchParams(k=10, ef_s=params.ef_s, alpha_s=params.alpha_s, rerank=3.0)
    quant = [greedy_search(index, store, q, rp) for q in queries]
    r_full = mean_recall([r.ids for r in full], truth, 10)
    r_quant = mean_recall([r.ids for r in quant], truth, 10)
    max_hp = max(r.stats.n_hp for r in quant)
    ok = abs(r_full - r_quant) <= 0.01 and max_hp <= 30
    detail = (f"recall {r_quant:.4f} vs full {r_full:.4f} (gap {r_full - r_quant:+.4f}), "
              f"max n_hp {max_hp}")
    assert record(4, ok, detail, t0, 120)


def test_criterion_05_truncation_lowers_inlier_error():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    X = rng.normal(0.0, 0.1, size=(5000, 16)).astype(np.float32)
    rows = rng.integers(0, len(X), size=(4, 16))
    for d in range(16):
        X[rows[:, d], d] = rng.uniform(20, 40, size=4)
    inlier = np.abs(X) < 1.0
    errs = {}
    for q in (0.99, 1.0):
        m = train_quantizer(X, bits=8, quantile=q)
        errs[q] = float(np.abs(m.dequantize(m.quantize(X)) - X)[inlier].mean())
    detail = f"inlier error q=0.99 {errs[0.99]:.3g} vs q=1.0 {errs[1.0]:.3g}"
    assert record(5, errs[0.99] < errs[1.0], detail, t0, 10)


# -- neutrality and access pattern ------------------------------------------------------


def test_criterion_06_prefetch_and_redundancy_are_neutral(uniform_index):
    t0 = time.perf_counter()
    X, idx = uniform_index
    queries = uniform(30, 16, seed=60)
    codes = CodeStore.encode_dataset(train_quantizer(X, bits=8), X)
    stores = {0.0: QuantizedStore(codes, X), 0.5: PrsStore(idx, codes, X, 0.5),
              1.0: PrsStore(idx, codes, X, 1.0)}
    params = SearchParams(k=10, ef_s=48)
    ref = [greedy_search(idx, stores[0.0], q, params, EnvParams(0, 1)) for q in queries]
    ref = [(r.ids, r.dists) for r in ref]
    differing = []
    for delta, store in stores.items():
        for w in (0, 2, 4, 8):
            for v in (1, 2, 4):
                got = [greedy_search(idx, store, q, params, EnvParams(w, v)) for q in queries]
                if [(r.ids, r.dists) for r in got] != ref:
                    differing.append((delta, w, v))
    detail = f"{36 - len(differing)}/36 (delta, stride, depth) settings bit-identical"
    if differing:
        detail += f"; differing {differing[:5]}"
    assert record(6, not differing, detail, t0, 60)


def test_criterion_07_each_payload_fetched_at_most_once(uniform_index):
    t0 = time.perf_counter()
    X, idx = uniform_index
    queries = uniform(100, 16, seed=70)
    codes = CodeStore.encode_dataset(train_quantizer(X, bits=8), X)
    worst = 0
    for inner in (VectorStore(X), PrsStore(idx, codes, X, 0.5)):
        store = InstrumentedStore(inner)
        for q in queries:
            store.reset()
            greedy_search(idx, store, q, SearchParams(k=10, ef_s=64), EnvParams(4, 2))
            worst = max(worst, max(store.fetches.values()))
    assert record(7, worst <= 1, f"max fetches of one node in one query = {worst}", t0, 30)


# -- tuners ---------------------------------------------------------------------------


def test_criterion_08_ilp_sweep_without_rebuilds():
    t0 = time.perf_counter()
    base, queries = clustered(2000, 16, seed=8, n_queries=50)
    index = build_index(base, BuildParams(m_c=32, ef_c=64))
    truth = brute_force_groundtruth(base, queries, 10)[0].tolist()
    store = VectorStore(base)
    before = build_calls()
    front = sweep_ilp(index, store, queries, truth, (8, 16, 24, 32), DEFAULT_ALPHAS, ef_s=32)
    rebuilds = build_calls() - before
    dominated = [p for p in front.points if any(o.dominates(p) for o in front.evaluated)]
    triple = pareto_frontier([FrontierPoint("A", 0.91, 2000), FrontierPoint("B", 0.90, 2100),
                              FrontierPoint("C", 0.89, 2200)])
    chosen = select_ilp(triple, min_recall=0.90).config
    ok = rebuilds == 0 and not dominated and chosen == "B" and len(front.evaluated) == 24
    detail = (f"{len(front.evaluated)} configs, {rebuilds} rebuilds, frontier size "
              f"{len(front)}, dominated on frontier {len(dominated)}, selection {chosen}")
    assert record(8, ok, detail, t0, 180)


def test_criterion_09_adaptive_pool_saves_work():
    t0 = time.perf_counter()
    w = planted_mixed_difficulty()
    store = VectorStore(w.base)
    model = train_qlp_model(w.index, store, w.train_q, w.train_gt, target_recall=1.0,
                            ef_low=10, ef_high=128, max_depth=2, min_samples_leaf=5)
    params = SearchParams(k=10, ef_s=128)
    fixed = [greedy_search(w.index, store, q, params) for q in w.test_q]
    adapt = [adaptive_search(w.index, store, q, model, params) for q in w.test_q]
    n_fixed = float(np.mean([r.stats.n_lp for r in fixed]))
    n_adapt = float(np.mean([r.stats.n_lp for r in adapt]))
    saving = 1.0 - n_adapt / n_fixed
    drop = (mean_recall([r.ids for r in fixed], w.test_gt, 10)
            - mean_recall([r.ids for r in adapt], w.test_gt, 10))
    detail = (f"mean n_lp {n_fixed:.1f} -> {n_adapt:.1f} ({saving:.1%} fewer), recall drop "
              f"{drop:.4f}, held-out accuracy {model.held_out_accuracy:.2f}")
    assert record(9, saving >= 0.10 and drop <= 0.01, detail, t0, 120)


# -- numerics and formats ----------------------------------------------------------------


def test_criterion_10_decomposed_distance_accuracy():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    worst = 0.0
    for d in (8, 128, 1536):
        A = rng.uniform(-1, 1, (10_000, d)).astype(np.float32).astype(np.float64)
        B = rng.uniform(-1, 1, (10_000, d)).astype(np.float32).astype(np.float64)
        for a, b in zip(A, B):
            direct = float(batch_exact_distance(a[None, :], b)[0])
            dec = decomposed_distance(PreparedQuery.prepare(b), a, float(a @ a))
            worst = max(worst, abs(dec - direct) / max(abs(direct), 1e-300))
    assert record(10, worst <= 1e-4, f"max relative error {worst:.2e}", t0, 10)


def test_criterion_11_formats_round_trip(tmp_path, uniform_index):
    t0 = time.perf_counter()
    X, idx = uniform_index
    problems = []

    fixture = bytes.fromhex("02000000" "0000803f" "00000040")
    (tmp_path / "two.fvecs").write_bytes(fixture)
    two = read_fvecs(tmp_path / "two.fvecs")
    write_fvecs(two, tmp_path / "two_again.fvecs")
    if two.vectors.tolist() != [[1.0, 2.0]] or \
            (tmp_path / "two_again.fvecs").read_bytes() != fixture:
        problems.append("two-float fixture")

    def again(name, write, read, obj):
        a, b = tmp_path / f"{name}.a", tmp_path / f"{name}.b"
        write(obj, a)
        write(read(a), b)
        if a.read_bytes() != b.read_bytes():
            problems.append(name)

    again("fvecs", write_fvecs, read_fvecs, X)
    truth = brute_force_groundtruth(X, X[:25], 10)[0].tolist()
    again("ivecs", write_ivecs, read_ivecs, truth)
    again("index", lambda g, p: g.save(p), GraphIndex.load, idx)
    for bits in (4, 8):
        codes = CodeStore.encode_dataset(train_quantizer(X, bits=bits), X)
        again(f"codes{bits}", lambda c, p: c.save(p), CodeStore.load, codes)
    detail = "all byte-identical" if not problems else f"mismatched: {problems}"
    assert record(11, not problems, detail, t0, 5)


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
