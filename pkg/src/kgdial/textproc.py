"""Tokenization, vocabularies, TF-IDF cosine, n-grams and LCS."""

from __future__ import annotations

import math
import string
from collections import Counter
from typing import Iterable, Mapping, Sequence

BOS, EOS, CLS, SEP = "[BOS]", "[EOS]", "[CLS]", "[SEP]"
USER, SYS, KNOW, UNK, PAD = "[user]", "[sys]", "[know]", "[UNK]", "[PAD]"
SPECIAL_TOKENS = (BOS, EOS, CLS, SEP, USER, SYS, KNOW, UNK, PAD)
MARKERS = frozenset(SPECIAL_TOKENS)

_EDGE_PUNCT = string.punctuation


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge ASCII punctuation, drop empties."""
    out = []
    for raw in text.split():
        tok = raw.strip(_EDGE_PUNCT).lower()
        if tok:
            out.append(tok)
    return out


class Vocabulary:
    """Token <-> id mapping; the nine special tokens hold ids 0-8."""

    def __init__(self, tokens: Sequence[str] = ()):
        self.itos: list[str] = list(SPECIAL_TOKENS)
        for tok in tokens:
            if tok not in MARKERS:
                self.itos.append(tok)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("vocabulary tokens must be unique")

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, tok: str) -> bool:
        return tok in self.stoi

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    @property
    def unk_id(self) -> int:
        return self.stoi[UNK]

    def id(self, tok: str) -> int:
        return self.stoi.get(tok, self.stoi[UNK])

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.id(t) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for i, tok in enumerate(self.itos):
                f.write(f"{tok}\t{i}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        rows = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                tok, idx = line.rsplit("\t", 1)
                rows.append((int(idx), tok))
        rows.sort()
        if [i for i, _ in rows] != list(range(len(rows))):
            raise ValueError(f"{path}: ids are not contiguous from 0")
        toks = [t for _, t in rows]
        if tuple(toks[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError(f"{path}: special tokens missing or out of order")
        return cls(toks[len(SPECIAL_TOKENS):])


def build_vocab(texts: Iterable[str], min_freq: int = 1, max_size: int | None = None) -> Vocabulary:
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    counts: Counter[str] = Counter()
    for text in texts:
        counts.update(tokenize(text))
    kept = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
    if max_size is not None:
        kept = kept[: max(0, max_size - len(SPECIAL_TOKENS))]
    return Vocabulary(kept)


class TfIdfIndex:
    """Smoothed-idf TF-IDF over a reference corpus, with raw term-frequency weights.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1. Terms absent from the reference
    corpus carry no weight.
    """

    def __init__(self, documents: Sequence[Sequence[str]]):
        n = len(documents)
        df: Counter[str] = Counter()
        for doc in documents:
            df.update(set(doc))
        self.n_docs = n
        self.idf: dict[str, float] = {t: math.log((1 + n) / (1 + c)) + 1.0 for t, c in df.items()}
        self.doc_vectors: dict[int, dict[str, float]] = {}
        self.norms: dict[int, float] = {}
        for i, doc in enumerate(documents):
            vec = self.vectorize(doc)
            self.doc_vectors[i] = vec
            self.norms[i] = _norm(vec)

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "TfIdfIndex":
        return cls([tokenize(t) for t in texts])

    def vectorize(self, tokens: Sequence[str]) -> dict[str, float]:
        tf = Counter(t for t in tokens if t in self.idf)
        return {t: c * self.idf[t] for t, c in tf.items()}

    def doc_cosine(self, i: int, j: int) -> float:
        return _cosine(self.doc_vectors[i], self.norms[i], self.doc_vectors[j], self.norms[j])


def _norm(vec: Mapping[str, float]) -> float:
    return math.sqrt(sum(v * v for v in vec.values()))


def _cosine(a: Mapping[str, float], na: float, b: Mapping[str, float], nb: float) -> float:
    if na == 0.0 or nb == 0.0:
        return 0.0
    if len(a) > len(b):
        a, b = b, a
    dot = sum(v * b[t] for t, v in a.items() if t in b)
    return min(1.0, max(0.0, dot / (na * nb)))


def tfidf_cosine(a: Sequence[str], b: Sequence[str], index: TfIdfIndex) -> float:
    va, vb = index.vectorize(a), index.vectorize(b)
    return _cosine(va, _norm(va), vb, _norm(vb))


def ngrams(seq: Sequence[str], n: int) -> Counter:
    if n < 1:
        raise ValueError("n must be >= 1")
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def lcs_length(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]
