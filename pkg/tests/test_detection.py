import numpy as np
import pytest
from hypothesis import given, strategies as st

from kgdial.corpus import Corpus, DialogueContext, TurnLabel
from kgdial.detection import build_detection_input, detect, detect_all, train_detector
from kgdial.errors import SingleClassError
from kgdial.metrics import prf1
from kgdial.models import LinearHead, TrainConfig
from kgdial.textproc import BOS, EOS, SYS, USER

D = 1 << 12


def faq_corpus(n=40, seed=0):
    rng = np.random.default_rng(seed)
    words = "hello there what about the room price view booking tonight please thanks".split()
    contexts, labels = [], []
    for i in range(n):
        body = " ".join(rng.choice(words, size=5))
        target = i % 2 == 0
        text = f"{body} faq" if target else body
        contexts.append(DialogueContext.of(("U", "hi"), ("S", "how can i help"), ("U", text)))
        labels.append(TurnLabel(True, ("hotel", "1", "1"), "ok") if target else TurnLabel(False))
    return Corpus(contexts, labels)


def test_single_turn_layout():
    assert build_detection_input(DialogueContext.of(("U", "hi"))) == [BOS, USER, "hi", EOS]


def test_markers_follow_speakers():
    ctx = DialogueContext.of(("U", "a"), ("S", "b"), ("U", "c"))
    assert build_detection_input(ctx) == [BOS, USER, "a", SYS, "b", USER, "c", EOS]


def test_truncation_drops_oldest_turns():
    turns = [("U", " ".join(["u"] * 9)), ("S", " ".join(["s"] * 9)),
             ("U", " ".join(["v"] * 9)), ("S", " ".join(["t"] * 9)), ("U", "final user turn here")]
    ctx = DialogueContext.of(*turns)
    out = build_detection_input(ctx, max_tokens=16)
    # 16 = BOS + EOS + 14: the last turn takes 5, the next-oldest keeps its marker and 8 tail tokens
    assert out == [BOS, SYS] + ["t"] * 8 + [USER, "final", "user", "turn", "here", EOS]
    assert len(out) == 16
    with pytest.raises(ValueError):
        build_detection_input(ctx, max_tokens=7)


def test_truncation_of_one_long_turn_keeps_tail():
    ctx = DialogueContext.of(("U", " ".join(str(i) for i in range(30))))
    out = build_detection_input(ctx, max_tokens=10)
    assert out == [BOS, USER] + [str(i) for i in range(23, 30)] + [EOS]


@given(st.lists(st.tuples(st.sampled_from("US"), st.lists(st.sampled_from(["a", "bb", "c"]), min_size=1, max_size=12)),
                min_size=1, max_size=8),
       st.integers(8, 40))
def test_marker_integrity(turns, budget):
    turns[-1] = ("U", turns[-1][1])
    ctx = DialogueContext.of(*[(sp, " ".join(words)) for sp, words in turns])
    out = build_detection_input(ctx, budget)
    assert out[0] == BOS and out[-1] == EOS and len(out) <= budget
    markers = [t for t in out if t in (USER, SYS)]
    retained = ctx.turns[len(ctx.turns) - len(markers):]
    assert markers == [USER if t.speaker.value == "U" else SYS for t in retained]
    # the tail of the final user turn is always intact
    last = " ".join(turns[-1][1]).split()
    tail = out[out.index(USER, len(out) - 1 - min(len(last), budget - 3) - 1) + 1 : -1] if markers[-1] == USER else []
    assert tail == last[len(last) - len(tail):] and tail


def test_faq_rule_is_learned():
    corpus = faq_corpus()
    head, trace = train_detector(corpus, TrainConfig(lr=0.5, epochs=30, batch_size=4), dim=D)
    preds = [d for d, _ in detect_all(head, corpus.contexts)]
    assert prf1(preds, [int(l.target) for l in corpus.labels])[2] == 1.0
    assert detect(head, DialogueContext.of(("U", "what about the faq")))[0] == 1
    assert len(trace) == 30


def test_zero_epochs_gives_half_scores():
    corpus = faq_corpus()
    head, _ = train_detector(corpus, TrainConfig(epochs=0), dim=D)
    assert not head.w.any()
    assert all(s == 0.5 and d == 1 for d, s in detect_all(head, corpus.contexts))


def test_threshold_semantics():
    ctx = DialogueContext.of(("U", "hi"))
    zero = LinearHead.zeros(D)
    assert detect(zero, ctx) == (1, 0.5)
    assert detect(zero, ctx, threshold=1.1)[0] == 0
    head = LinearHead(np.zeros(D), 0.3)
    decisions = [detect(head, ctx, threshold=t)[0] for t in np.linspace(0, 1, 21)]
    assert decisions == sorted(decisions, reverse=True)


def test_single_class_rejected():
    corpus = faq_corpus()
    neg = Corpus([c for c, l in zip(corpus.contexts, corpus.labels) if not l.target],
                 [l for l in corpus.labels if not l.target])
    with pytest.raises(SingleClassError):
        train_detector(neg, TrainConfig(), dim=D)


def test_training_is_deterministic():
    corpus = faq_corpus()
    cfg = TrainConfig(lr=0.5, epochs=5, batch_size=3, seed=4)
    h1, t1 = train_detector(corpus, cfg, dim=D)
    h2, t2 = train_detector(corpus, cfg, dim=D)
    assert t1 == t2 and np.array_equal(h1.w, h2.w)
