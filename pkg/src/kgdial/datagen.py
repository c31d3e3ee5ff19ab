"""Synthesizing spoken-style training dialogues for a new knowledge store.

Knowledge-seeking dialogues from a source corpus become templates (final
user turn removed, source-entity mentions marked). Each target snippet is
paired with sampled templates; the entity mentions are rewritten, and the
new final user turn / response are the candidate utterances most similar to
the snippet's title / body. User turns then pass through a rule-based
ASR-style noise simulator.
"""

from __future__ import annotations

import enum
import json
import math
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .corpus import Corpus, DialogueContext, KnowledgeSnippet, KnowledgeStore, Speaker, Turn, TurnLabel
from .errors import NoTemplates, NotKnowledgeSeeking
from .textproc import TfIdfIndex, tfidf_cosine, tokenize

DEFAULT_FILLERS = ("uh", "um", "er", "you know", "like")
DEFAULT_CONFUSIONS = {
    "to": "two", "for": "four", "their": "there", "right": "write", "hear": "here",
    "by": "buy", "no": "know", "wait": "weight", "see": "sea", "one": "won",
    "would": "wood", "ate": "eight", "our": "hour", "new": "knew",
}


@dataclass(frozen=True)
class DialogueTemplate:
    turns: tuple[Turn, ...]
    entity_name: str
    slots: tuple[int, ...]  # indexes into turns whose text mentions entity_name
    domain: str = ""


class CandidateSource(str, enum.Enum):
    SOURCE_DIALOGUE = "source_dialogue"
    SOURCE_KNOWLEDGE_TITLE = "source_knowledge_title"
    TARGET_KNOWLEDGE_TITLE = "target_knowledge_title"
    SOURCE_KNOWLEDGE_BODY = "source_knowledge_body"
    TARGET_KNOWLEDGE_BODY = "target_knowledge_body"


@dataclass
class CandidateSet:
    utterances: list[tuple[str, CandidateSource]]
    index: TfIdfIndex = field(init=False, repr=False)

    def __post_init__(self):
        seen: set[str] = set()
        kept = []
        for text, src in self.utterances:
            key = " ".join(tokenize(text))
            if key and key not in seen:
                seen.add(key)
                kept.append((text, CandidateSource(src)))
        if not kept:
            raise ValueError("candidate set is empty")
        self.utterances = kept
        self.tokens = [tokenize(t) for t, _ in kept]
        self.index = TfIdfIndex(self.tokens)

    def __len__(self) -> int:
        return len(self.utterances)

    def best_match(self, text: str) -> tuple[int, float]:
        """Index and cosine of the first candidate most similar to ``text``."""
        query = tokenize(text)
        best, best_sim = 0, -1.0
        for i, toks in enumerate(self.tokens):
            sim = tfidf_cosine(query, toks, self.index)
            if sim > best_sim:
                best, best_sim = i, sim
        return best, best_sim


def build_candidate_set(source: Corpus, source_store: KnowledgeStore, target_store: KnowledgeStore) -> CandidateSet:
    utts: list[tuple[str, CandidateSource]] = []
    for ctx, lab in zip(source.contexts, source.labels):
        utts.extend((t.text, CandidateSource.SOURCE_DIALOGUE) for t in ctx.turns)
        if lab.target:
            utts.append((lab.response, CandidateSource.SOURCE_DIALOGUE))
    utts.extend((s.title, CandidateSource.SOURCE_KNOWLEDGE_TITLE) for s in source_store)
    utts.extend((s.title, CandidateSource.TARGET_KNOWLEDGE_TITLE) for s in target_store)
    utts.extend((s.body, CandidateSource.SOURCE_KNOWLEDGE_BODY) for s in source_store)
    utts.extend((s.body, CandidateSource.TARGET_KNOWLEDGE_BODY) for s in target_store)
    return CandidateSet(utts)


def make_template(dialogue: DialogueContext, label: TurnLabel, store: KnowledgeStore) -> DialogueTemplate:
    if not label.target:
        raise NotKnowledgeSeeking("only knowledge-seeking dialogues can become templates")
    gold = store.get(label.gold)
    turns = dialogue.turns[:-1]
    name = gold.entity_name.lower()
    slots = tuple(i for i, t in enumerate(turns) if name and name in t.text.lower())
    return DialogueTemplate(turns, gold.entity_name, slots, gold.domain)


def _replace_ci(text: str, old: str, new: str) -> str:
    return re.sub(re.escape(old), lambda _: new, text, flags=re.IGNORECASE)


def instantiate(
    template: DialogueTemplate, snippet: KnowledgeSnippet, candidates: CandidateSet
) -> tuple[DialogueContext, TurnLabel]:
    turns = list(template.turns)
    if snippet.entity_name and template.entity_name:
        for i in template.slots:
            t = turns[i]
            turns[i] = Turn(t.speaker, _replace_ci(t.text, template.entity_name, snippet.entity_name))
    q, _ = candidates.best_match(snippet.title)
    a, _ = candidates.best_match(snippet.body)
    turns.append(Turn(Speaker.USER, candidates.utterances[q][0]))
    return DialogueContext(tuple(turns)), TurnLabel(True, snippet.ref, candidates.utterances[a][0])


@dataclass(frozen=True)
class NoiseConfig:
    p_filler: float = 0.3
    p_repeat: float = 0.1
    p_bargein: float = 0.05
    p_strip: float = 1.0
    p_confusion: float = 0.1
    fillers: tuple[str, ...] = DEFAULT_FILLERS
    confusions: tuple[tuple[str, str], ...] = tuple(DEFAULT_CONFUSIONS.items())
    seed: int = 0

    def __post_init__(self):
        for name in ("p_filler", "p_repeat", "p_bargein", "p_strip", "p_confusion"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        conf = self.confusions.items() if isinstance(self.confusions, dict) else self.confusions
        conf = tuple((str(k), str(v)) for k, v in conf)
        if any(k == v for k, v in conf):
            raise ValueError("confusion table maps a word to itself")
        object.__setattr__(self, "confusions", conf)
        object.__setattr__(self, "fillers", tuple(self.fillers))
        if self.p_filler > 0 and not self.fillers:
            raise ValueError("filler insertion needs a non-empty lexicon")

    @classmethod
    def zero(cls, seed: int = 0) -> "NoiseConfig":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, seed=seed)

    @classmethod
    def from_json(cls, obj: dict) -> "NoiseConfig":
        keys = ("p_filler", "p_repeat", "p_bargein", "p_strip", "p_confusion", "fillers", "confusions", "seed")
        unknown = set(obj) - set(keys)
        if unknown:
            raise ValueError(f"unknown noise config keys: {sorted(unknown)}")
        return cls(**obj)

    def to_json(self) -> dict:
        return {
            "p_filler": self.p_filler, "p_repeat": self.p_repeat, "p_bargein": self.p_bargein,
            "p_strip": self.p_strip, "p_confusion": self.p_confusion,
            "fillers": list(self.fillers), "confusions": dict(self.confusions), "seed": self.seed,
        }


def token_retention(original: str, noised: str) -> float:
    """Share of the original's content tokens still present (multiset intersection)."""
    orig = Counter(tokenize(original))
    if not orig:
        return 1.0
    return sum((orig & Counter(tokenize(noised))).values()) / sum(orig.values())


def inject_noise(text: str, config: NoiseConfig, rng: np.random.Generator) -> str:
    """Confusions and repetitions per token, then one filler, a barge-in cut, and stripping.

    Confusions and the barge-in cut are capped so that at least half of the
    content tokens survive.
    """
    words = text.split()
    content = [i for i, w in enumerate(words) if tokenize(w)]
    max_subs = len(content) - math.ceil(len(content) / 2)
    confusions = dict(config.confusions)
    # (surface form, original position or -1 for inserted material)
    out: list[tuple[str, int]] = []
    subs = 0
    for pos, w in enumerate(words):
        key = w.strip(string.punctuation).lower()
        if rng.random() < config.p_confusion and key in confusions and subs < max_subs:
            w = w.replace(w.strip(string.punctuation), confusions[key]) if key else w
            pos_tag = -1
            subs += 1
        else:
            pos_tag = pos
        out.append((w, pos_tag))
        if rng.random() < config.p_repeat:
            out.append((w, -1))
    if rng.random() < config.p_filler and config.fillers:
        filler = config.fillers[int(rng.integers(len(config.fillers)))]
        out.insert(int(rng.integers(len(out) + 1)), (filler, -1))
    if rng.random() < config.p_bargein and out:
        cut = int(rng.integers(1, math.ceil(len(out) / 3) + 1))
        while cut > 0 and token_retention(text, " ".join(w for w, _ in out[: len(out) - cut])) < 0.5:
            cut -= 1
        if cut:
            out = out[: len(out) - cut]
    noised = " ".join(w for w, _ in out)
    if rng.random() < config.p_strip:
        noised = " ".join(tokenize(noised))
    return noised


def build_training_corpus(
    source: Corpus,
    source_store: KnowledgeStore,
    target_store: KnowledgeStore,
    noise: NoiseConfig,
    per_snippet: int = 1,
    seed: int = 0,
    domain_matched: bool = False,
    candidates: Optional[CandidateSet] = None,
) -> Corpus:
    """``per_snippet`` noised dialogues for every target snippet, in snippet order."""
    if per_snippet < 1:
        raise ValueError("per_snippet must be >= 1")
    templates = [
        make_template(c, lab, source_store)
        for c, lab in zip(source.contexts, source.labels)
        if lab.target
    ]
    if not templates:
        raise NoTemplates("source corpus has no knowledge-seeking dialogues")
    cands = candidates or build_candidate_set(source, source_store, target_store)
    contexts, labels = [], []
    for s_idx, snippet in enumerate(target_store):
        pool = templates
        if domain_matched:
            pool = [t for t in templates if t.domain == snippet.domain] or templates
        for rep in range(per_snippet):
            rng = np.random.default_rng([seed, s_idx, rep])
            template = pool[int(rng.integers(len(pool)))]
            ctx, label = instantiate(template, snippet, cands)
            noise_rng = np.random.default_rng([noise.seed, seed, s_idx, rep])
            turns = tuple(
                Turn(t.speaker, inject_noise(t.text, noise, noise_rng) or t.text)
                if t.speaker is Speaker.USER else t
                for t in ctx.turns
            )
            contexts.append(DialogueContext(turns))
            labels.append(label)
    return Corpus(contexts, labels, target_store.fingerprint())


def load_noise_config(path) -> NoiseConfig:
    with open(path, encoding="utf-8") as f:
        return NoiseConfig.from_json(json.load(f))
