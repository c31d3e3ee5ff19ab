"""Weighted negative sampling over four snippet categories.

Each of the k draws for one positive picks a category with probability
proportional to its weight (restricted to categories that still have unused
snippets), then a snippet uniformly from that category's remaining pool.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import DOMAIN_WIDE_ENTITY, KnowledgeStore, SnippetRef
from .errors import ExhaustedPools
from .textproc import TfIdfIndex, tokenize


class NegCategory(enum.IntEnum):
    RANDOM = 0
    IN_ENTITY = 1
    IN_DOMAIN = 2
    SEMANTICALLY_SIMILAR = 3


CATEGORIES = tuple(NegCategory)
DEFAULT_WEIGHTS = (2.0, 1.0, 2.0, 2.0)


@dataclass(frozen=True)
class SamplerConfig:
    weights: tuple[float, float, float, float] = DEFAULT_WEIGHTS
    k: int = 4
    sim_pool_size: int = 10
    seed: int = 0
    exact_ratio: bool = False

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) != 4:
            raise ValueError("expected four category weights (random, in-entity, in-domain, similar)")
        if any(x < 0 or not math.isfinite(x) for x in w):
            raise ValueError("category weights must be finite and non-negative")
        if not any(x > 0 for x in w):
            raise ValueError("at least one category weight must be positive")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.sim_pool_size < 1:
            raise ValueError("sim_pool_size must be positive")
        object.__setattr__(self, "weights", w)

    def check_store(self, store: KnowledgeStore) -> None:
        if self.k >= len(store):
            raise ValueError(f"k={self.k} must be smaller than the store size {len(store)}")

    @staticmethod
    def parse_weights(text: str) -> tuple[float, float, float, float]:
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected four comma-separated weights, got {text!r}")
        return tuple(parts)


@dataclass(frozen=True)
class NegativeBatch:
    negatives: tuple[tuple[int, NegCategory], ...]

    @property
    def ids(self) -> list[int]:
        return [i for i, _ in self.negatives]

    @property
    def categories(self) -> list[NegCategory]:
        return [c for _, c in self.negatives]


@dataclass
class SimilarityPools:
    pools: dict[int, tuple[int, ...]] = field(default_factory=dict)
    size: int = 10

    def __getitem__(self, gold: int) -> tuple[int, ...]:
        return self.pools[gold]


def build_similarity_pools(store: KnowledgeStore, M: int = 10) -> SimilarityPools:
    """Top-M most similar snippets per snippet by TF-IDF cosine over title + body."""
    if len(store) < 2:
        raise ValueError("similarity pools need at least two snippets")
    if M < 1:
        raise ValueError("M must be >= 1")
    index = TfIdfIndex([tokenize(s.text) for s in store])
    n = len(store)
    sims = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            sims[i, j] = sims[j, i] = index.doc_cosine(i, j)
    pools = {}
    for i in range(n):
        others = [j for j in range(n) if j != i]
        # stable sort keeps snippet-id order among equal similarities
        others.sort(key=lambda j: -sims[i, j])
        pools[i] = tuple(others[:M])
    return SimilarityPools(pools, M)


def category_pool(
    store: KnowledgeStore, pools: SimilarityPools, gold: int, cat: NegCategory
) -> tuple[int, ...]:
    """Snippet ids eligible as negatives of category ``cat`` for gold snippet ``gold``."""
    g = store[gold]
    if cat is NegCategory.RANDOM:
        members: Sequence[int] = range(len(store))
    elif cat is NegCategory.IN_ENTITY:
        if g.entity_id == DOMAIN_WIDE_ENTITY:
            return ()
        members = store.by_entity[(g.domain, g.entity_id)]
    elif cat is NegCategory.IN_DOMAIN:
        members = store.by_domain[g.domain]
    else:
        members = pools[gold]
    return tuple(i for i in members if i != gold)


def exact_counts(weights: Sequence[float], k: int) -> list[int]:
    """Largest-remainder allocation of k draws proportional to the weights."""
    total = sum(weights)
    quotas = [w * k / total for w in weights]
    counts = [math.floor(q) for q in quotas]
    order = sorted(range(len(weights)), key=lambda c: (-(quotas[c] - counts[c]), c))
    for c in order[: k - sum(counts)]:
        counts[c] += 1
    return counts


def sample_negatives(
    store: KnowledgeStore,
    pools: SimilarityPools,
    gold: int | SnippetRef,
    config: SamplerConfig,
    rng: np.random.Generator,
) -> NegativeBatch:
    if not isinstance(gold, (int, np.integer)):
        gold = store.index_of(gold)
    config.check_store(store)
    cat_pools = {c: list(category_pool(store, pools, gold, c)) for c in CATEGORIES}
    weights = np.asarray(config.weights)
    taken: set[int] = set()
    drawn: list[tuple[int, NegCategory]] = []

    def remaining(c: NegCategory) -> list[int]:
        return [i for i in cat_pools[c] if i not in taken]

    def draw_from(c: NegCategory, avail: list[int]) -> None:
        pick = avail[int(rng.integers(len(avail)))]
        taken.add(pick)
        drawn.append((pick, c))

    if config.exact_ratio:
        for c, count in zip(CATEGORIES, exact_counts(config.weights, config.k)):
            for _ in range(count):
                avail = remaining(c)
                if not avail:
                    break
                draw_from(c, avail)

    while len(drawn) < config.k:
        avail = {c: remaining(c) for c in CATEGORIES}
        w = np.array([weights[c] if avail[c] else 0.0 for c in CATEGORIES])
        if w.sum() <= 0:
            # fall back to any category with unused snippets before declaring exhaustion
            w = np.array([1.0 if avail[c] else 0.0 for c in CATEGORIES])
            if w.sum() <= 0:
                raise ExhaustedPools(f"no negatives left for gold {gold} after {len(drawn)} draws")
        c = CATEGORIES[int(rng.choice(4, p=w / w.sum()))]
        draw_from(c, avail[c])
    return NegativeBatch(tuple(drawn))
