"""Knowledge selection: cross-input scoring trained against weighted negatives."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .corpus import Corpus, DialogueContext, KnowledgeSnippet, KnowledgeStore, SnippetRef
from .errors import NoPositives
from .models import (
    DEFAULT_DIM,
    FeatureVector,
    LinearHead,
    TrainConfig,
    featurize,
    sgd_train,
    softmax_ce_loss_grad,
)
from .negsampler import (
    NegativeBatch,
    SamplerConfig,
    SimilarityPools,
    build_similarity_pools,
    sample_negatives,
)
from .textproc import CLS, EOS, SEP, TfIdfIndex, tokenize

DEFAULT_MAX_TOKENS = 256


def render_snippet(snippet: KnowledgeSnippet) -> list[str]:
    """``domain entity_name title body`` as tokens (an empty name contributes nothing)."""
    return (
        tokenize(snippet.domain)
        + tokenize(snippet.entity_name)
        + tokenize(snippet.title)
        + tokenize(snippet.body)
    )


def context_tokens(context: DialogueContext) -> list[str]:
    return [tok for turn in context.turns for tok in tokenize(turn.text)]


def build_selection_input(
    context: DialogueContext,
    snippet: KnowledgeSnippet,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    _knowledge: Optional[list[str]] = None,
) -> list[str]:
    """``[CLS] u_1 s_2 ... u_m [SEP] k_j [EOS]``; overflow drops the oldest context tokens."""
    know = _knowledge if _knowledge is not None else render_snippet(snippet)
    ctx = context_tokens(context)
    room = max(max_tokens - 3 - len(know), 0)
    ctx = ctx[len(ctx) - room :] if room else []
    return [CLS] + ctx + [SEP] + know + [EOS]


@dataclass(frozen=True)
class SelectionExample:
    context: DialogueContext
    gold: int
    negatives: NegativeBatch


@dataclass(frozen=True)
class Ranking:
    entries: tuple[tuple[SnippetRef, float], ...]

    @property
    def refs(self) -> list[SnippetRef]:
        return [r for r, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


class SelectionFeaturizer:
    """Feature extraction against one store, with per-(context, snippet) caching."""

    def __init__(self, store: KnowledgeStore, dim: int = DEFAULT_DIM, max_tokens: int = DEFAULT_MAX_TOKENS):
        self.store = store
        self.dim = dim
        self.max_tokens = max_tokens
        self.index = TfIdfIndex([tokenize(s.text) for s in store])
        self._know = [render_snippet(s) for s in store]
        self._names = [tokenize(s.entity_name) for s in store]
        self._cache: dict[tuple[DialogueContext, int], FeatureVector] = {}

    def __call__(self, context: DialogueContext, idx: int) -> FeatureVector:
        key = (context, idx)
        fv = self._cache.get(key)
        if fv is None:
            toks = build_selection_input(context, self.store[idx], self.max_tokens, self._know[idx])
            fv = featurize(toks, self.dim, self.index, self._names[idx])
            self._cache[key] = fv
        return fv


def train_selector(
    corpus: Corpus,
    store: KnowledgeStore,
    sampler_config: SamplerConfig,
    train_config: TrainConfig,
    dim: int = DEFAULT_DIM,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    pools: Optional[SimilarityPools] = None,
    featurizer: Optional[SelectionFeaturizer] = None,
) -> tuple[LinearHead, list[float]]:
    """One SGD step per positive per epoch over [gold; freshly drawn negatives]."""
    positives = corpus.positives()
    if not positives:
        raise NoPositives("selection training needs knowledge-seeking turns")
    sampler_config.check_store(store)
    if pools is None:
        pools = build_similarity_pools(store, sampler_config.sim_pool_size)
    feats = featurizer or SelectionFeaturizer(store, dim, max_tokens)
    golds = [(corpus.contexts[i], store.index_of(corpus.labels[i].gold)) for i in positives]

    def epoch_data(epoch: int) -> list[list[FeatureVector]]:
        out = []
        for j, (ctx, gold) in enumerate(golds):
            rng = np.random.default_rng([sampler_config.seed, epoch, j])
            batch = sample_negatives(store, pools, gold, sampler_config, rng)
            out.append([feats(ctx, gold)] + [feats(ctx, i) for i in batch.ids])
        return out

    def loss_grad(head, batch):
        total, grad = 0.0, None
        for cands in batch:
            loss, g = softmax_ce_loss_grad(head, cands, train_config.l2)
            total += loss
            if grad is None:
                grad = g
            else:
                grad.w += g.w
                grad.b += g.b
        return total, grad

    head = LinearHead.zeros(feats.dim)
    config = dataclasses.replace(train_config, batch_size=1)
    return sgd_train(head, epoch_data, config, loss_grad)


def score_all(
    head: LinearHead, context: DialogueContext, featurizer: SelectionFeaturizer,
    candidates: Optional[Sequence[int]] = None,
) -> np.ndarray:
    ids = range(len(featurizer.store)) if candidates is None else candidates
    return np.array([head.score(featurizer(context, i)) for i in ids])


def rank_knowledge(
    head: LinearHead,
    context: DialogueContext,
    store: KnowledgeStore,
    top_k: int = 5,
    featurizer: Optional[SelectionFeaturizer] = None,
    filter_domain: Optional[str] = None,
) -> Ranking:
    """Score the whole store (or one domain) and return the ``top_k`` best, ties by snippet id."""
    feats = featurizer or SelectionFeaturizer(store, head.dim)
    ids = list(range(len(store))) if filter_domain is None else list(store.by_domain.get(filter_domain, ()))
    scores = score_all(head, context, feats, ids)
    order = sorted(range(len(ids)), key=lambda j: (-scores[j], ids[j]))[:top_k]
    return Ranking(tuple((store[ids[j]].ref, float(scores[j])) for j in order))
