from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from kgdial.corpus import KnowledgeSnippet, KnowledgeStore
from kgdial.errors import DanglingReference
from kgdial.negsampler import (
    NegCategory,
    SamplerConfig,
    build_similarity_pools,
    category_pool,
    exact_counts,
    sample_negatives,
)
from kgdial.textproc import tokenize
from oracles import dense_tfidf_cosine


@pytest.fixture(scope="module")
def pools(store):
    return build_similarity_pools(store, 10)


def snip(domain, ent, doc, title="t", body="b"):
    return KnowledgeSnippet(domain, ent, f"name {ent}", doc, title, body)


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(weights=(0, 0, 0, 0))
    with pytest.raises(ValueError):
        SamplerConfig(weights=(1, -1, 0, 0))
    with pytest.raises(ValueError):
        SamplerConfig(k=0)
    assert SamplerConfig.parse_weights("2,1,2,2") == (2.0, 1.0, 2.0, 2.0)
    with pytest.raises(ValueError):
        SamplerConfig.parse_weights("1,2")
    store = KnowledgeStore([snip("h", "1", str(i)) for i in range(4)])
    with pytest.raises(ValueError):
        SamplerConfig(k=4).check_store(store)


def test_pool_examples():
    two = KnowledgeStore([snip("h", "1", "a", "x y", "z"), snip("h", "1", "b", "p q", "r")])
    p = build_similarity_pools(two, 5)
    assert p[0] == (1,) and p[1] == (0,)
    dup = KnowledgeStore([
        snip("h", "1", "a", "is parking free", "yes it is"),
        snip("h", "1", "b", "are pets allowed", "no"),
        snip("h", "2", "c", "is parking free", "yes it is"),
    ])
    assert build_similarity_pools(dup, 2)[0][0] == 2


def test_pools_match_all_pairs_oracle(store, pools):
    docs = [tokenize(s.text) for s in store]
    n = len(store)
    sims = np.array([[dense_tfidf_cosine(docs[i], docs[j], docs) for j in range(n)] for i in range(n)])
    for i in range(n):
        got = pools[i]
        assert len(got) == min(10, n - 1) and i not in got
        # descending similarity, ties in id order
        keys = [(-round(sims[i, j], 9), j) for j in got]
        assert keys == sorted(keys)
        # nothing outside the pool is strictly more similar than its last member
        cutoff = sims[i, got[-1]]
        outside = [j for j in range(n) if j != i and j not in got]
        assert all(sims[i, j] <= cutoff + 1e-9 for j in outside)


def test_category_pool_examples(store, pools):
    gold = store.index_of(("hotel", "e_1", "d_3"))
    in_entity = category_pool(store, pools, gold, NegCategory.IN_ENTITY)
    assert sorted(store[i].doc_id for i in in_entity) == ["d_1", "d_2", "d_4", "d_5"]
    assert all(store[i].entity_id == "e_1" for i in in_entity)
    assert len(category_pool(store, pools, gold, NegCategory.RANDOM)) == 59
    in_domain = category_pool(store, pools, gold, NegCategory.IN_DOMAIN)
    assert len(in_domain) == 19 and set(in_entity) <= set(in_domain)
    assert category_pool(store, pools, gold, NegCategory.SEMANTICALLY_SIMILAR) == pools[gold]

    single = KnowledgeStore([snip("h", "1", "a")] + [snip("h", "2", str(i)) for i in range(9)])
    sp = build_similarity_pools(single, 3)
    assert category_pool(single, sp, 0, NegCategory.IN_ENTITY) == ()
    assert len(category_pool(single, sp, 0, NegCategory.IN_DOMAIN)) == 9
    assert len(category_pool(single, sp, 0, NegCategory.RANDOM)) == 9


def test_domain_wide_entity_has_no_in_entity_pool():
    st_ = KnowledgeStore([
        KnowledgeSnippet("h", "*", "", "1", "t1", "b1"),
        KnowledgeSnippet("h", "*", "", "2", "t2", "b2"),
        snip("h", "1", "3"),
    ])
    p = build_similarity_pools(st_, 2)
    assert category_pool(st_, p, 0, NegCategory.IN_ENTITY) == ()
    assert len(category_pool(st_, p, 0, NegCategory.IN_DOMAIN)) == 2


def test_random_only_small_store_forced():
    st_ = KnowledgeStore([snip("h", "1", str(i)) for i in range(5)])
    p = build_similarity_pools(st_, 2)
    batch = sample_negatives(st_, p, 0, SamplerConfig((1, 0, 0, 0), k=4), np.random.default_rng(0))
    assert sorted(batch.ids) == [1, 2, 3, 4]
    assert set(batch.categories) == {NegCategory.RANDOM}


def test_gold_by_ref_and_dangling(store, pools):
    b = sample_negatives(store, pools, ("hotel", "e_1", "d_1"), SamplerConfig(), np.random.default_rng(1))
    assert 0 not in b.ids
    with pytest.raises(DanglingReference):
        sample_negatives(store, pools, ("hotel", "e_9", "d_1"), SamplerConfig(), np.random.default_rng(1))


@given(st.integers(0, 59), st.integers(0, 2**32 - 1),
       st.tuples(*[st.integers(0, 3)] * 4).filter(any), st.integers(1, 8), st.booleans())
def test_batch_invariants(store_gold, seed, weights, k, exact):
    from kgdial import benchmarks
    store = benchmarks.fixture_store()
    pools = _pools_cache(store)
    cfg = SamplerConfig(weights, k=k, seed=seed, exact_ratio=exact)
    batch = sample_negatives(store, pools, store_gold, cfg, np.random.default_rng(seed))
    again = sample_negatives(store, pools, store_gold, cfg, np.random.default_rng(seed))
    assert batch == again
    assert len(batch.ids) == k and len(set(batch.ids)) == k and store_gold not in batch.ids
    for i, c in batch.negatives:
        assert i in category_pool(store, pools, store_gold, c)


_POOLS = {}


def _pools_cache(store):
    if "p" not in _POOLS:
        _POOLS["p"] = build_similarity_pools(store, 10)
    return _POOLS["p"]


def test_exact_counts():
    assert exact_counts((2, 1, 2, 2), 4) == [1, 1, 1, 1]
    assert exact_counts((2, 1, 2, 2), 7) == [2, 1, 2, 2]
    assert exact_counts((2, 1, 2, 2), 14) == [4, 2, 4, 4]
    assert exact_counts((1, 0, 0, 0), 3) == [3, 0, 0, 0]
    assert sum(exact_counts((3, 1, 1, 1), 5)) == 5


def test_exact_ratio_k4_one_per_category(store, pools):
    cfg = SamplerConfig(k=4, exact_ratio=True)
    for g in range(0, 60, 7):
        b = sample_negatives(store, pools, g, cfg, np.random.default_rng(g))
        assert sorted(b.categories) == list(NegCategory)


def category_frequencies(store, pools, cfg, n, seed):
    counts = Counter()
    rng = np.random.default_rng(seed)
    golds = rng.integers(len(store), size=n)
    for g in golds:
        counts.update(sample_negatives(store, pools, int(g), cfg, rng).categories)
    return np.array([counts[c] for c in NegCategory], dtype=float)


def test_empty_in_entity_renormalizes():
    # every gold is the only document of its entity
    st_ = KnowledgeStore([snip("h" if i < 20 else "r", str(i), "1", f"t{i} x", f"b{i} y") for i in range(40)])
    pools = build_similarity_pools(st_, 10)
    freq = category_frequencies(st_, pools, SamplerConfig(), 3000, 5)
    assert freq[NegCategory.IN_ENTITY] == 0
    share = freq / freq.sum()
    # per-draw renormalization over the remaining pools, so ~ (2,2,2)/6
    for c in (NegCategory.RANDOM, NegCategory.IN_DOMAIN, NegCategory.SEMANTICALLY_SIMILAR):
        assert abs(share[c] - 1 / 3) <= 0.03


def test_zero_weight_fallback_when_weighted_pools_run_dry(store, pools):
    # in-entity only, but each entity has just 4 other docs and k = 6
    cfg = SamplerConfig((0, 1, 0, 0), k=6)
    b = sample_negatives(store, pools, 0, cfg, np.random.default_rng(0))
    assert b.categories.count(NegCategory.IN_ENTITY) == 4
    assert len(set(b.ids)) == 6


def test_weighted_ratio_chi_square(store, pools):
    freq = category_frequencies(store, pools, SamplerConfig(), 3000, 11)
    expected = np.array([2, 1, 2, 2]) / 7 * freq.sum()
    assert chisquare(freq, expected).pvalue > 0.01
