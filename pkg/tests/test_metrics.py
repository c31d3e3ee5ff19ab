import math

import pytest
from hypothesis import given, strategies as st

from kgdial.errors import EmptyReference, LengthMismatch
from kgdial.metrics import (
    MetricsReport,
    bleu,
    evaluate_pipeline,
    meteor_alignment,
    meteor_lite,
    mrr_at_k,
    prf1,
    recall_at_k,
    rouge_l,
    rouge_n,
    stem,
)
from metric_checks import VOCAB, metric_mismatches


def label(target, ref=None, response=None):
    if not target:
        return {"target": False}
    return {"target": True, "knowledge": [dict(zip(("domain", "entity_id", "doc_id"), ref))], "response": response}


def test_prf1_examples():
    assert prf1([1, 0, 1], [1, 0, 1]) == (1, 1, 1)
    assert prf1([0, 0, 0], [1, 0, 1]) == (0, 0, 0)
    p, r, f = prf1([1, 1, 1, 0, 0], [1, 1, 0, 1, 0])
    assert (p, r, f) == pytest.approx((2 / 3, 2 / 3, 2 / 3))
    with pytest.raises(LengthMismatch):
        prf1([1], [1, 0])


def test_ranking_examples():
    assert mrr_at_k([["g", "x"]] * 3, ["g"] * 3) == 1.0
    assert mrr_at_k([["x", "y", "g"]], ["g"]) == pytest.approx(1 / 3)
    assert mrr_at_k([["x"] * 5 + ["g"]], ["g"]) == 0.0
    assert recall_at_k([["x", "g"]] * 2, ["g"] * 2, 2) == 1.0
    assert recall_at_k([["x", "g"]] * 2, ["g"] * 2, 1) == 0.0
    with pytest.raises(LengthMismatch):
        mrr_at_k([["g"]], ["g", "h"])


def test_bleu_examples():
    ref = "the cat sat on the mat".split()
    for n in range(1, 5):
        assert bleu([ref], [[ref]], n) == pytest.approx(1.0)
    assert bleu([["the", "the", "the"]], [[["the", "cat"]]], 1) == pytest.approx(1 / 3)
    # brevity penalty for a short candidate
    assert bleu([["the", "cat"]], [[ref]], 1) == pytest.approx(math.exp(1 - 6 / 2))
    assert bleu([["dog"]], [[ref]], 1) == 0.0
    with pytest.raises(EmptyReference):
        bleu([["a"]], [[]], 1)
    with pytest.raises(LengthMismatch):
        bleu([["a"]], [], 1)


def test_bleu_monotone_in_order_on_fixture():
    cands = ["the hotel has free parking".split(), "pets are allowed in rooms".split(), "check in is at three".split()]
    refs = [["the hotel offers free parking".split()], ["pets are allowed in all rooms".split()],
            ["check in starts at three".split()]]
    scores = [bleu(cands, refs, n) for n in range(1, 5)]
    assert all(s > 0 for s in scores)
    assert scores == sorted(scores, reverse=True)


def test_meteor_examples():
    s = "a b c d".split()
    assert meteor_lite(s, s) == pytest.approx(0.9921875)
    assert meteor_lite(["x"], ["y"]) == 0.0
    assert stem("opens") == "open" and stem("opening") == "open" and stem("is") == "is"
    assert meteor_alignment(["opens", "opening"], ["open", "opens"]) == [(0, 1), (1, 0)]
    with pytest.raises(EmptyReference):
        meteor_lite(["a"], [])


def test_rouge_examples():
    s = "a b c".split()
    assert rouge_n(s, s, 1) == rouge_n(s, s, 2) == rouge_l(s, s) == 1.0
    assert rouge_l("a b c d".split(), "a c d".split()) == pytest.approx(6 / 7)
    assert rouge_n(["x"], ["y"], 1) == rouge_l(["x"], ["y"]) == 0.0
    assert rouge_n(["a"], ["a"], 2) == 0.0
    with pytest.raises(EmptyReference):
        rouge_l(["a"], [])


def test_metrics_match_oracles():
    assert set(metric_mismatches(500, seed=1).values()) == {0}


@given(st.lists(st.sampled_from(VOCAB), max_size=8), st.lists(st.sampled_from(VOCAB), min_size=1, max_size=8))
def test_metric_ranges(c, r):
    for v in (meteor_lite(c, r), rouge_n(c, r, 1), rouge_n(c, r, 2), rouge_l(c, r), bleu([c], [[r]], 2)):
        assert 0.0 <= v <= 1.0


def test_evaluate_perfect_predictions():
    golds = [label(True, ("hotel", "1", "2"), "yes it is free"), label(False), label(True, ("taxi", "*", "1"), "no pets")]
    rep = evaluate_pipeline(golds, golds)
    assert (rep.precision, rep.recall, rep.f1) == (1, 1, 1)
    assert (rep.mrr_at_5, rep.recall_at_1, rep.recall_at_5) == (1, 1, 1)
    # corpus-level BLEU pools n-grams, so the short reference does not zero BLEU-4
    assert rep.bleu_1 == pytest.approx(1.0) and rep.bleu_4 == pytest.approx(1.0)
    assert rep.meteor == pytest.approx((meteor_lite(*["yes it is free".split()] * 2) + meteor_lite(*[["no", "pets"]] * 2)) / 2)
    assert rep.rouge_l == 1.0
    assert rep.counts == {"turns": 3, "gold_targets": 2, "scored": 2}


def test_evaluate_all_negative_predictions():
    golds = [label(True, ("hotel", "1", "2"), "yes"), label(False)]
    rep = evaluate_pipeline([label(False), label(False)], golds)
    assert not rep.selection_present and not rep.generation_present
    assert rep.mrr_at_5 == rep.bleu_1 == rep.f1 == 0.0
    assert "no scored turns" in rep.table()


def test_evaluate_rankings_and_cascade():
    a, b = ("hotel", "1", "2"), ("hotel", "1", "3")
    golds = [label(True, a, "yes"), label(True, b, "no"), label(False)]
    preds = [label(True, b, "yes"), label(False), label(True, a, "maybe")]
    rankings = [[b, a], None, [a]]
    rep = evaluate_pipeline(preds, golds, rankings)
    assert rep.mrr_at_5 == pytest.approx(0.25) and rep.recall_at_1 == 0.0 and rep.recall_at_5 == 0.5
    casc = evaluate_pipeline(preds, golds, rankings, mode="cascade")
    assert casc.mrr_at_5 == pytest.approx(0.5) and casc.counts["scored"] == 1 and casc.bleu_1 == 1.0
    with pytest.raises(LengthMismatch):
        evaluate_pipeline(preds[:2], golds)
    with pytest.raises(ValueError):
        evaluate_pipeline(preds, golds, mode="other")


def test_report_invariants_and_serialization():
    golds = [label(True, ("hotel", "1", "2"), "yes it is"), label(False), label(True, ("hotel", "1", "1"), "no")]
    preds = [label(True, ("hotel", "1", "2"), "yes"), label(True, ("hotel", "1", "1"), "x"), label(False)]
    rep = evaluate_pipeline(preds, golds)
    assert rep.f1 == pytest.approx(2 * rep.precision * rep.recall / (rep.precision + rep.recall), abs=1e-9)
    assert all(0 <= getattr(rep, a) <= 1 for _, a in MetricsReport.COLUMNS)
    assert rep.to_json() == evaluate_pipeline(preds, golds).to_json()
    assert rep.table().splitlines()[0].split(" | ")[0].strip() == "Precision"
