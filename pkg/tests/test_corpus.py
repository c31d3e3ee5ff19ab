import json

import pytest
from hypothesis import given, strategies as st

from kgdial import benchmarks
from kgdial.corpus import (
    Corpus,
    DialogueContext,
    KnowledgeSnippet,
    KnowledgeStore,
    Speaker,
    Turn,
    TurnLabel,
    corpus_from_json,
    knowledge_from_json,
    load_corpus,
    load_knowledge,
    save_corpus,
    save_knowledge,
)
from kgdial.errors import DanglingReference, EmptyStore, LengthMismatch, ParseError


def write(path, obj):
    path.write_text(json.dumps(obj), encoding="utf-8")
    return path


KB = {"hotel": {"1": {"name": "Arc Hotel", "docs": {
    "0": {"title": "Is parking free?", "body": "Yes, parking is free."},
    "1": {"title": "Are pets allowed?", "body": "No pets."},
}}}}


def test_one_entity_two_docs(tmp_path):
    store = load_knowledge(write(tmp_path / "k.json", KB))
    assert len(store) == 2
    assert len(store.by_domain) == 1
    assert store.by_entity[("hotel", "1")] == (0, 1)
    assert store[0].entity_name == "Arc Hotel"


def test_duplicate_key_rejected(tmp_path):
    raw = '{"hotel": {"1": {"name": "A", "docs": {"0": {"title": "t", "body": "b"}, "0": {"title": "t2", "body": "b2"}}}}}'
    p = tmp_path / "k.json"
    p.write_text(raw)
    with pytest.raises(ParseError):
        load_knowledge(p)


def test_duplicate_snippet_objects_rejected():
    s = KnowledgeSnippet("hotel", "1", "A", "0", "t", "b")
    with pytest.raises(ParseError):
        KnowledgeStore([s, s])


def test_empty_store_and_bad_fields(tmp_path):
    with pytest.raises(EmptyStore):
        load_knowledge(write(tmp_path / "k.json", {}))
    with pytest.raises(ParseError):
        load_knowledge(write(tmp_path / "k2.json", {"hotel": {"1": {"name": "A", "docs": {"0": {"title": " ", "body": "b"}}}}}))
    with pytest.raises(ParseError):
        load_knowledge(write(tmp_path / "k3.json", {"hotel": {"1": {"name": "A", "docs": {"0": {"body": "b"}}}}}))
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_knowledge(p)


def test_domain_wide_entity_has_empty_name():
    store = knowledge_from_json({"hotel": {"*": {"name": None, "docs": {"1": {"title": "t", "body": "b"}}}}})
    assert store[0].entity_name == ""


def test_fixture_store_size_matches_independent_leaf_count(fixtures_dir, store):
    raw = json.loads((fixtures_dir / "knowledge_small.json").read_text())
    leaves = sum(len(ent["docs"]) for dom in raw.values() for ent in dom.values())
    assert leaves == 60
    assert len(store) == leaves
    assert len(store.by_domain) == 3
    assert all(len(v) == 5 for v in store.by_entity.values())


def test_index_consistency(store):
    for i, s in enumerate(store):
        buckets = [k for k, v in store.by_entity.items() if i in v]
        assert buckets == [(s.domain, s.entity_id)]
        assert i in store.by_domain[s.domain]
        assert store.index_of(s.ref) == i
    rebuilt = KnowledgeStore(list(store))
    assert rebuilt.by_domain == store.by_domain and rebuilt.by_entity == store.by_entity


LOGS = [[{"speaker": "U", "text": "hi"}], [{"speaker": "U", "text": "is parking free?"}]]
LABELS = [{"target": False}, {"target": True, "knowledge": [{"domain": "hotel", "entity_id": "1", "doc_id": "0"}], "response": "Yes."}]


def test_load_corpus_examples(tmp_path):
    store = knowledge_from_json(KB)
    c = load_corpus(write(tmp_path / "l.json", LOGS), write(tmp_path / "b.json", LABELS), store)
    assert len(c) == 2 and c.positives() == [1]
    with pytest.raises(LengthMismatch):
        corpus_from_json(LOGS, LABELS + [{"target": False}], store)
    bad = [LABELS[0], {**LABELS[1], "knowledge": [{"domain": "hotel", "entity_id": "1", "doc_id": "9"}]}]
    with pytest.raises(DanglingReference):
        corpus_from_json(LOGS, bad, store)


def test_multiple_golds_rejected():
    store = knowledge_from_json(KB)
    two = {**LABELS[1], "knowledge": LABELS[1]["knowledge"] * 2}
    with pytest.raises(ParseError):
        corpus_from_json(LOGS, [LABELS[0], two], store)


def test_context_and_label_invariants():
    with pytest.raises(ValueError):
        DialogueContext.of(("U", "hi"), ("S", "hello"))
    with pytest.raises(ValueError):
        DialogueContext(())
    with pytest.raises(ValueError):
        Turn(Speaker.USER, "   ")
    with pytest.raises(ValueError):
        TurnLabel(True)
    with pytest.raises(ValueError):
        TurnLabel(False, ("a", "b", "c"), "r")


def test_empty_corpus_round_trip(tmp_path, store):
    save_corpus(Corpus([], [], ""), tmp_path / "l.json", tmp_path / "b.json")
    assert json.loads((tmp_path / "l.json").read_text()) == []
    assert json.loads((tmp_path / "b.json").read_text()) == []
    assert len(load_corpus(tmp_path / "l.json", tmp_path / "b.json", store)) == 0


def test_knowledge_round_trip(tmp_path, store):
    save_knowledge(store, tmp_path / "k.json")
    assert load_knowledge(tmp_path / "k.json") == store


def test_synthesized_corpus_round_trip_is_byte_exact(tmp_path, store, source_store, source_corpus):
    from kgdial.datagen import NoiseConfig, build_training_corpus

    c = build_training_corpus(source_corpus, source_store, store, NoiseConfig(seed=3), per_snippet=1, seed=4)
    save_corpus(c, tmp_path / "l.json", tmp_path / "b.json")
    back = load_corpus(tmp_path / "l.json", tmp_path / "b.json", store)
    assert back.contexts == c.contexts and back.labels == c.labels
    save_corpus(back, tmp_path / "l2.json", tmp_path / "b2.json")
    assert (tmp_path / "l.json").read_bytes() == (tmp_path / "l2.json").read_bytes()


texts = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), min_size=1).filter(lambda t: t.strip())


@given(st.lists(st.tuples(texts, st.booleans()), min_size=0, max_size=5), st.data())
def test_round_trip_property(tmp_path_factory, dialogues, data):
    store = benchmarks.fixture_store()
    contexts, labels = [], []
    for text, target in dialogues:
        turns = [Turn(Speaker.SYSTEM, text), Turn(Speaker.USER, text)]
        contexts.append(DialogueContext(tuple(turns)))
        if target:
            ref = store[data.draw(st.integers(0, len(store) - 1))].ref
            labels.append(TurnLabel(True, ref, text))
        else:
            labels.append(TurnLabel(False))
    d = tmp_path_factory.mktemp("rt")
    save_corpus(Corpus(contexts, labels), d / "l.json", d / "b.json")
    back = load_corpus(d / "l.json", d / "b.json", store)
    assert back.contexts == contexts and back.labels == labels
