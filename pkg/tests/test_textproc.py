import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from kgdial.textproc import (
    SPECIAL_TOKENS,
    TfIdfIndex,
    Vocabulary,
    build_vocab,
    lcs_length,
    ngrams,
    tfidf_cosine,
    tokenize,
)
from oracles import brute_lcs, dense_tfidf_cosine


def test_tokenize_examples():
    assert tokenize("Can I bring my dog?") == ["can", "i", "bring", "my", "dog"]
    assert tokenize("") == []
    assert tokenize("Wi-Fi, free!!") == ["wi-fi", "free"]
    assert tokenize("  ...  ") == []


@given(st.text())
def test_tokenize_idempotent_and_clean(text):
    toks = tokenize(text)
    assert tokenize(" ".join(toks)) == toks
    assert all(t and not any(c.isspace() for c in t) and t == t.lower() for t in toks)


def test_specials_fixed_ids():
    v = Vocabulary(["a"])
    assert v.itos[:9] == list(SPECIAL_TOKENS)
    assert v.stoi["[PAD]"] == 8 and v.stoi["[BOS]"] == 0
    assert v.id("zzz") == v.unk_id == 7


def test_build_vocab_examples():
    assert build_vocab(["a a b"], 2).itos[9:] == ["a"]
    assert build_vocab(["a b", "b c"], 1).itos[9:] == ["b", "a", "c"]
    assert len(build_vocab(["a b c d"], 1, max_size=11)) == 11
    with pytest.raises(ValueError):
        build_vocab(["a"], 0)


def test_build_vocab_fixture_against_independent_count(fixtures_dir):
    lines = (fixtures_dir / "post_train.txt").read_text().splitlines()
    counts = Counter()
    for line in lines:
        for raw in line.split():
            tok = raw.strip("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~").lower()
            if tok:
                counts[tok] += 1
    expected = sum(1 for c in counts.values() if c >= 2)
    assert len(build_vocab(lines, 2)) == 9 + expected


def test_vocab_save_load(tmp_path):
    v = build_vocab(["hello world", "hello there"])
    v.save(tmp_path / "v.txt")
    assert Vocabulary.load(tmp_path / "v.txt") == v
    assert (tmp_path / "v.txt").read_text().splitlines()[0] == "[BOS]\t0"


DOCS = [tokenize(t) for t in (
    "what time is check in", "check out time is noon", "is there free parking",
    "check in starts at two", "pets are allowed", "free wifi in every room",
)]


def test_tfidf_examples():
    index = TfIdfIndex(DOCS)
    a = ["check", "in", "time"]
    assert tfidf_cosine(a, a, index) == pytest.approx(1.0, abs=1e-9)
    assert tfidf_cosine(["pets"], ["parking"], index) == 0.0
    b = ["check", "out", "time"]
    assert tfidf_cosine(a, b, index) == pytest.approx(dense_tfidf_cosine(a, b, DOCS), abs=1e-9)
    # terms outside the reference corpus carry no weight
    assert tfidf_cosine(["unseen"], ["unseen"], index) == 0.0


vocab_words = st.sampled_from(sorted({t for d in DOCS for t in d}) + ["zebra"])


@given(st.lists(vocab_words, max_size=8), st.lists(vocab_words, max_size=8))
def test_tfidf_symmetric_bounded_and_matches_dense(a, b):
    index = TfIdfIndex(DOCS)
    x, y = tfidf_cosine(a, b, index), tfidf_cosine(b, a, index)
    assert x == pytest.approx(y, abs=1e-12)
    assert -1e-9 <= x <= 1 + 1e-9
    assert x == pytest.approx(dense_tfidf_cosine(a, b, DOCS), abs=1e-9)


def test_doc_cosine_matches_query_cosine():
    index = TfIdfIndex(DOCS)
    for i in range(len(DOCS)):
        for j in range(len(DOCS)):
            assert index.doc_cosine(i, j) == pytest.approx(tfidf_cosine(DOCS[i], DOCS[j], index), abs=1e-12)


def test_ngrams_examples():
    assert ngrams(["a", "b", "c"], 2) == Counter({("a", "b"): 1, ("b", "c"): 1})
    assert ngrams(["a"], 2) == Counter()
    assert ngrams(["a", "a", "a"], 1) == Counter({("a",): 3})
    with pytest.raises(ValueError):
        ngrams(["a"], 0)


def test_lcs_examples():
    assert lcs_length(list("abcd"), list("acd")) == 3
    assert brute_lcs(list("abcd"), list("acd")) == 3
    assert lcs_length(list("hello"), list("hello")) == 5
    assert lcs_length(["a"], ["b"]) == 0


def test_lcs_matches_brute_force_on_1000_pairs():
    rng = random.Random(0)
    for _ in range(1000):
        a = [rng.choice("abcd") for _ in range(rng.randint(0, 8))]
        b = [rng.choice("abcd") for _ in range(rng.randint(0, 8))]
        got = lcs_length(a, b)
        assert got == brute_lcs(a, b)
        assert got == lcs_length(b, a) and got <= min(len(a), len(b))


@settings(max_examples=300)
@given(st.lists(st.sampled_from("abc"), max_size=8), st.lists(st.sampled_from("abc"), max_size=8))
def test_lcs_property(a, b):
    assert lcs_length(a, b) == brute_lcs(a, b)
