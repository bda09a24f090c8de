
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelgraph.core import exact_distance
from labelgraph.evaluation import brute_force_groundtruth, mean_recall
from labelgraph.graph import BuildParams, GraphIndex
from labelgraph.pool import CandidatePool
from labelgraph.quant import CodeStore, QuantizerModel, train_quantizer
from labelgraph.search import (EnvParams, InstrumentedStore, PrsStore, QuantizedStore, SearchStats,
                               SearchParams, VectorStore, build_prs, greedy_search,
                               search_batch, selective_rerank)
from oracles import knn


def star_index(labels):
    """Node 0 points to nodes 1..len(labels); every other node is a leaf."""
    n = len(labels) + 1
    return GraphIndex([list(range(1, n))] + [[] for _ in range(n - 1)],
                      [list(labels)] + [[] for _ in range(n - 1)],
                      [[float(i) for i in range(1, n)]] + [[] for _ in range(n - 1)],
                      dim=2, params=BuildParams(m_c=len(labels), ef_c=len(labels)))


def star_points(n):
    return np.array([[float(i), 0.0] for i in range(n)], dtype=np.float32)


@pytest.fixture(scope="module")
def quantized(desk):
    base, queries, index = desk
    model = train_quantizer(base, bits=8, quantile=0.995)
    return CodeStore.encode_dataset(model, base)


# -- pool ------------------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 10), st.integers(0, 50)), max_size=60),
       st.integers(1, 10))
def test_pool_keeps_nearest(entries, cap):
    pool = CandidatePool(cap)
    seen = {}
    for d, i in entries:
        if i not in seen:
            seen[i] = d
            pool.insert(d, i)
        assert len(pool) <= cap
    want = sorted((d, i) for i, d in seen.items())[:cap]
    assert pool.items() == want


def test_pool_ties_prefer_lower_id():
    pool = CandidatePool(2)
    for i in (5, 3, 9):
        pool.insert(1.0, i)
    assert pool.ids() == [3, 5]


# -- search ----------------------------------------------------------------------


def test_single_node_graph():
    idx = GraphIndex([[]], [[]], [[]], dim=2, params=BuildParams(m_c=4, ef_c=4))
    res = greedy_search(idx, VectorStore(np.array([[1.0, 1.0]], np.float32)), [0.0, 0.0],
                        SearchParams(k=1, ef_s=1))
    assert res.ids == [0] and res.dists == [2.0]


def test_hop_visits_only_label_valid_capped_neighbors():
    idx = star_index([1.0, 1.4, 1.0, 1.2, 1.0])
    store = InstrumentedStore(VectorStore(star_points(6)))
    greedy_search(idx, store, [0.0, 0.0], SearchParams(k=1, ef_s=4, m_s=3, alpha_s=1.2))
    assert set(store.fetches) == {0, 1, 3, 4}


def test_prefetch_hint_counts():
    idx = star_index([1.0] * 5)
    store = InstrumentedStore(VectorStore(star_points(6)))
    greedy_search(idx, store, [0.0, 0.0], SearchParams(k=1, ef_s=6), EnvParams(3, 2))
    # only node 0 has neighbors: one hop, |N| = 5 hints, 3 warm-up then 2 in-loop
    assert [n for n, _ in store.prefetch_calls] == [1, 2, 3, 4, 5]
    assert {d for _, d in store.prefetch_calls} == {2}
    store.reset()
    greedy_search(idx, store, [0.0, 0.0], SearchParams(k=1, ef_s=6), EnvParams(0, 4))
    assert store.prefetch_calls == []


def test_full_precision_recall(desk):
    base, queries, index = desk
    truth, _ = brute_force_groundtruth(base, queries, 10)
    res = search_batch(index, VectorStore(base), queries, SearchParams(k=10, ef_s=64))
    assert mean_recall([r.ids for r in res], truth.tolist(), 10) >= 0.95


def test_recall_non_decreasing_in_pool_size(desk):
    base, queries, index = desk
    truth = brute_force_groundtruth(base, queries, 10)[0].tolist()
    store = VectorStore(base)
    recalls = [mean_recall([r.ids for r in search_batch(index, store, queries,
                                                        SearchParams(k=10, ef_s=ef))],
                           truth, 10) for ef in (10, 20, 40, 80)]
    for a, b in zip(recalls, recalls[1:]):
        assert b >= a - 0.005


def test_results_are_exact_and_sorted(desk, quantized):
    base, queries, index = desk
    store = QuantizedStore(quantized, base)
    for q in queries[:20]:
        res = greedy_search(index, store, q, SearchParams(k=10, ef_s=40))
        assert len(set(res.ids)) == len(res.ids) == 10
        assert res.dists == sorted(res.dists)
        for i, d in zip(res.ids, res.dists):
            assert d == exact_distance(q, base[i])
        assert res.stats.n_hp <= 30


def test_each_payload_fetched_at_most_once(desk, quantized):
    base, queries, index = desk
    for delta in (0.0, 1.0):
        store = InstrumentedStore(PrsStore(index, quantized, base, delta))
        for q in queries[:30]:
            store.reset()
            greedy_search(index, store, q, SearchParams(k=10, ef_s=64), EnvParams(4, 2))
            assert max(store.fetches.values()) == 1


def test_pool_never_exceeds_capacity(desk):
    base, queries, index = desk
    sizes = []

    def watch(hop, pool, scanned):
        sizes.append(len(pool))

    greedy_search(index, VectorStore(base), queries[0], SearchParams(k=5, ef_s=17),
                  checkpoint=watch)
    assert sizes and max(sizes) <= 17


@pytest.mark.parametrize("env", [EnvParams(w, v) for w in (0, 2, 8) for v in (1, 4)])
def test_prefetch_does_not_change_results(desk, quantized, env):
    base, queries, index = desk
    store = QuantizedStore(quantized, base)
    for q in queries[:10]:
        a = greedy_search(index, store, q, SearchParams(k=10, ef_s=32))
        b = greedy_search(index, store, q, SearchParams(k=10, ef_s=32), env)
        assert (a.ids, a.dists) == (b.ids, b.dists)


def test_redundancy_does_not_change_results(desk, quantized):
    base, queries, index = desk
    stores = [PrsStore(index, quantized, base, d) for d in (0.0, 0.5, 1.0)]
    for q in queries[:10]:
        outs = {(tuple(r.ids), tuple(r.dists)) for r in
                (greedy_search(index, s, q, SearchParams(k=10, ef_s=32)) for s in stores)}
        assert len(outs) == 1


def test_underfilled_when_graph_is_disconnected():
    idx = GraphIndex([[], []], [[], []], [[], []], dim=2, params=BuildParams(m_c=2, ef_c=2))
    res = greedy_search(idx, VectorStore(star_points(2)), [0, 0], SearchParams(k=2, ef_s=2))
    assert res.ids == [0] and res.stats.underfilled


def test_multiple_entry_points():
    idx = GraphIndex([[], []], [[], []], [[], []], dim=2, params=BuildParams(m_c=2, ef_c=2))
    res = greedy_search(idx, VectorStore(star_points(2)), [0.9, 0], SearchParams(k=2, ef_s=2),
                        entry=[1, 0])
    assert res.ids == [1, 0]


def test_search_errors(small_index, small_data):
    store = VectorStore(small_data)
    q = small_data[0]
    with pytest.raises(ValueError):
        greedy_search(small_index, store, q, SearchParams(k=500, ef_s=500))
    with pytest.raises(ValueError):
        greedy_search(small_index, store, q, entry=[small_index.n])
    with pytest.raises(ValueError):
        greedy_search(small_index, store, q, SearchParams(m_s=small_index.m_c + 1))
    with pytest.raises(ValueError):
        greedy_search(small_index, store, q, SearchParams(alpha_s=0.9))
    with pytest.raises(ValueError):
        SearchParams(k=10, ef_s=5)
    with pytest.raises(ValueError):
        SearchParams(rerank=0.5)
    with pytest.raises(ValueError):
        EnvParams(-1, 1)


def test_inner_product_search(desk):
    base, queries, index = desk
    truth = brute_force_groundtruth(base, queries, 10, "ip")[0].tolist()
    res = search_batch(index, VectorStore(base, "ip"), queries, SearchParams(k=10, ef_s=128))
    assert mean_recall([r.ids for r in res], truth, 10) >= 0.8


# -- re-ranking ------------------------------------------------------------------


def test_exhaustive_rerank_is_exact_top_k(desk, quantized):
    base, queries, _ = desk
    store = QuantizedStore(quantized, base)
    q = queries[3]
    ids = list(range(0, 2000, 37))
    low = store.distances(store.prepare(q), ids)
    cands = sorted(zip(low.tolist(), ids))
    got, dists = selective_rerank(cands, q, store, 5, rerank=len(ids))
    assert got == [ids[i] for i in knn(base[ids], q, 5)]
    assert dists == [exact_distance(q, base[i]) for i in got]


def test_pool_of_k_reranks_everything(desk):
    base, queries, _ = desk
    store = VectorStore(base)
    cands = sorted(zip(store.distances(store.prepare(queries[0]), list(range(10))).tolist(),
                       range(10)))
    stats = SearchStats()
    selective_rerank(cands, queries[0], store, 10, 3.0, stats)
    assert stats.n_hp == 10


def test_rerank_fixes_quantization_inversion():
    # step 0.5: x0 = 0.26 decodes to 0.5 while x1 = 0.0 stays put, so from
    # q = 0.2 the codes rank x1 first although x0 is nearer
    base = np.array([[0.26], [0.0], [1.0]], np.float32)
    model = QuantizerModel(4, np.array([0.0], np.float32), np.array([7.5], np.float32))
    store = QuantizedStore(CodeStore.encode_dataset(model, base), base)
    q = np.array([0.2])
    low = store.distances(store.prepare(q), [0, 1, 2])
    cands = sorted(zip(low.tolist(), [0, 1, 2]))
    assert cands[0][1] == 1
    assert exact_distance(q, base[0]) < exact_distance(q, base[1])
    ids, _ = selective_rerank(cands, q, store, 1, rerank=2.0)
    assert ids == [0]


def test_rerank_empty_pool():
    with pytest.raises(ValueError):
        selective_rerank([], [0.0], VectorStore(star_points(1)[:, :1]), 1)


# -- redundant storage -----------------------------------------------------------


def test_redundant_block_sizes(desk, quantized):
    base, _, index = desk
    none = build_prs(index, quantized, 0.0, base)
    assert none.blocks == {} and none.extra_bytes == 0
    full = build_prs(index, quantized, 1.0, base)
    assert len(full.blocks) == index.n
    assert full.extra_bytes == sum(len(g) for g in index.neighbors) * quantized.code_len_bytes
    for i, block in full.blocks.items():
        assert block.tobytes() == b"".join(quantized.code(j) for j in index.neighbors[i])


def test_redundant_selection_by_in_degree(small_index, small_data):
    codes = CodeStore.encode_dataset(train_quantizer(small_data), small_data)
    half = PrsStore(small_index, codes, small_data, 0.5)
    assert len(half.blocks) == 200
    indeg = small_index.in_degrees()
    chosen = min(indeg[i] for i in half.blocks)
    others = [indeg[i] for i in range(small_index.n) if i not in half.blocks]
    assert max(others) <= chosen
    with pytest.raises(ValueError):
        PrsStore(small_index, codes, small_data, 1.5)
