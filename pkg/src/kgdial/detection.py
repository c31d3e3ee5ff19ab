"""Knowledge-seeking turn detection: a sigmoid linear head over hashed features."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import Corpus, DialogueContext, Speaker
from .errors import SingleClassError
from .models import (
    DEFAULT_DIM,
    FeatureVector,
    LinearHead,
    TrainConfig,
    bce_loss_grad,
    featurize,
    sgd_train,
    sigmoid_score,
)
from .textproc import BOS, EOS, SYS, USER, tokenize

DEFAULT_MAX_TOKENS = 256
DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class DetectionExample:
    input: tuple[str, ...]
    label: int


def speaker_marker(speaker: Speaker) -> str:
    return USER if speaker is Speaker.USER else SYS


def fit_turns(segments: list[list[str]], budget: int) -> list[list[str]]:
    """Fit marker-led turn segments into ``budget`` tokens.

    Whole oldest turns go first, as long as what remains still overflows;
    then the oldest survivor loses tokens from its head (its marker stays).
    The newest turn's tail is always kept.
    """
    segs = [list(s) for s in segments]
    while len(segs) > 1 and sum(map(len, segs[1:])) >= budget:
        segs.pop(0)
    excess = sum(map(len, segs)) - budget
    if excess > 0:
        head = segs[0]
        keep = max(len(head) - 1 - excess, 1 if len(segs) == 1 else 0)
        if keep == 0:
            segs.pop(0)
        else:
            segs[0] = [head[0]] + head[len(head) - keep :]
    return segs


def build_detection_input(context: DialogueContext, max_tokens: int = DEFAULT_MAX_TOKENS) -> list[str]:
    """``[BOS] [user] u_1 [sys] s_2 ... [user] u_m [EOS]``, truncated to ``max_tokens``."""
    if max_tokens < 8:
        raise ValueError("max_tokens must be >= 8")
    segments = [[speaker_marker(t.speaker)] + tokenize(t.text) for t in context.turns]
    kept = fit_turns(segments, max_tokens - 2)
    return [BOS] + [tok for seg in kept for tok in seg] + [EOS]


def detection_features(
    context: DialogueContext, dim: int = DEFAULT_DIM, max_tokens: int = DEFAULT_MAX_TOKENS
) -> FeatureVector:
    return featurize(build_detection_input(context, max_tokens), dim)


def train_detector(
    corpus: Corpus,
    config: TrainConfig,
    dim: int = DEFAULT_DIM,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> tuple[LinearHead, list[float]]:
    ys = [int(lab.target) for lab in corpus.labels]
    if len(set(ys)) < 2:
        raise SingleClassError("detection training needs both knowledge-seeking and other turns")
    data = [(detection_features(c, dim, max_tokens), y) for c, y in zip(corpus.contexts, ys)]
    head = LinearHead.zeros(dim)
    return sgd_train(head, data, config, lambda h, batch: bce_loss_grad(h, batch, config.l2))


def detect(
    head: LinearHead,
    context: DialogueContext,
    threshold: float = DEFAULT_THRESHOLD,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> tuple[int, float]:
    score = sigmoid_score(head, detection_features(context, head.dim, max_tokens))
    return int(score >= threshold), score


def detect_all(
    head: LinearHead,
    contexts: Sequence[DialogueContext],
    threshold: float = DEFAULT_THRESHOLD,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> list[tuple[int, float]]:
    return [detect(head, c, threshold, max_tokens) for c in contexts]
