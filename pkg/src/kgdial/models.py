"""Hashed sparse features, linear heads, a fixed-window neural LM, and SGD.

Checkpoint layout (all little-endian):

    linear head : b"KGDLIN1\\0" | uint64 D | float64 b | float64 w[D]
    neural LM   : b"KGDNLM1\\0" | uint64 V, N, d, h
                  | float64 emb[V*d] | W_h[(N*d)*h] | b_h[h] | W_o[h*V] | b_o[V]

Matrices are stored row-major.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DivergedError
from .textproc import MARKERS, SEP, TfIdfIndex, tfidf_cosine

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

DEFAULT_DIM = 1 << 18
N_RESERVED = 3  # ids D-1, D-2, D-3: overlap count, tf-idf cosine, entity match
PROB_CLAMP = 1e-12


@lru_cache(maxsize=1 << 20)
def fnv1a_64(text: str) -> int:
    h = FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class FeatureVector:
    ids: np.ndarray
    values: np.ndarray
    dim: int

    def __len__(self) -> int:
        return len(self.ids)

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.ids, self.values)}

    @classmethod
    def from_dict(cls, feats: dict[int, float], dim: int) -> "FeatureVector":
        items = sorted((i, v) for i, v in feats.items() if v != 0)
        ids = np.array([i for i, _ in items], dtype=np.int64)
        vals = np.array([v for _, v in items], dtype=np.float64)
        return cls(ids, vals, dim)


def featurize(
    tokens: Sequence[str],
    dim: int = DEFAULT_DIM,
    index: Optional[TfIdfIndex] = None,
    entity_name: Sequence[str] = (),
) -> FeatureVector:
    """Unigram + bigram counts hashed with FNV-1a 64 into ``[0, dim - 3)``.

    Sequences containing ``[SEP]`` also get three cross-boundary features:
    distinct-token overlap (id dim-1), TF-IDF cosine (dim-2, needs ``index``),
    and whether ``entity_name`` occurs contiguously on the left side (dim-3).
    Marker tokens are ignored by the cross-boundary features.
    """
    if dim < 1 << 10:
        raise ValueError("feature dimension must be at least 2**10")
    buckets = dim - N_RESERVED
    feats: dict[int, float] = {}
    for i, tok in enumerate(tokens):
        h = fnv1a_64(tok) % buckets
        feats[h] = feats.get(h, 0.0) + 1.0
        if i + 1 < len(tokens):
            h = fnv1a_64(f"{tok} {tokens[i + 1]}") % buckets
            feats[h] = feats.get(h, 0.0) + 1.0
    if SEP in tokens:
        cut = tokens.index(SEP)
        left = [t for t in tokens[:cut] if t not in MARKERS]
        right = [t for t in tokens[cut + 1 :] if t not in MARKERS]
        feats[dim - 1] = float(len(set(left) & set(right)))
        if index is not None:
            feats[dim - 2] = tfidf_cosine(left, right, index)
        feats[dim - 3] = 1.0 if _contains_run(left, list(entity_name)) else 0.0
    return FeatureVector.from_dict(feats, dim)


def _contains_run(seq: list[str], run: list[str]) -> bool:
    if not run:
        return False
    n = len(run)
    return any(seq[i : i + n] == run for i in range(len(seq) - n + 1))


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@dataclass
class LinearHead:
    w: np.ndarray
    b: float = 0.0

    @classmethod
    def zeros(cls, dim: int) -> "LinearHead":
        return cls(np.zeros(dim), 0.0)

    @property
    def dim(self) -> int:
        return len(self.w)

    def score(self, x: FeatureVector) -> float:
        if x.dim != self.dim:
            raise ValueError(f"feature dim {x.dim} != head dim {self.dim}")
        return float(self.w[x.ids] @ x.values) + self.b

    def copy(self) -> "LinearHead":
        return LinearHead(self.w.copy(), self.b)

    def step(self, grad: "LinearHead", lr: float) -> None:
        self.w -= lr * grad.w
        self.b -= lr * grad.b

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.w).all()) and math.isfinite(self.b)

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(b"KGDLIN1\0")
            f.write(struct.pack("<Qd", self.dim, self.b))
            f.write(self.w.astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "LinearHead":
        with open(path, "rb") as f:
            blob = f.read()
        if blob[:8] != b"KGDLIN1\0":
            raise ValueError(f"{path}: not a linear-head checkpoint")
        dim, b = struct.unpack_from("<Qd", blob, 8)
        w = np.frombuffer(blob, dtype="<f8", count=dim, offset=24).astype(np.float64)
        return cls(w, b)


def sigmoid_score(head: LinearHead, x: FeatureVector) -> float:
    return sigmoid(head.score(x))


def bce_loss_grad(
    head: LinearHead, examples: Sequence[tuple[FeatureVector, int]], l2: float = 0.0
) -> tuple[float, LinearHead]:
    """Summed binary cross-entropy plus (l2/2)||w||^2, and its exact gradient."""
    if not examples:
        raise ValueError("need at least one example")
    loss = 0.0
    gw = np.zeros_like(head.w)
    gb = 0.0
    for x, y in examples:
        p = sigmoid_score(head, x)
        pc = min(max(p, PROB_CLAMP), 1.0 - PROB_CLAMP)
        loss -= y * math.log(pc) + (1 - y) * math.log(1.0 - pc)
        # the clamp is flat outside (eps, 1-eps)
        g = (p - y) if PROB_CLAMP < p < 1.0 - PROB_CLAMP else 0.0
        if g:
            np.add.at(gw, x.ids, g * x.values)
            gb += g
    if l2:
        loss += 0.5 * l2 * float(head.w @ head.w)
        gw += l2 * head.w
    return loss, LinearHead(gw, gb)


def softmax_ce_loss_grad(
    head: LinearHead, candidates: Sequence[FeatureVector], l2: float = 0.0
) -> tuple[float, LinearHead]:
    """-log softmax(scores)[0] (gold first) plus (l2/2)||w||^2, and its gradient."""
    if len(candidates) < 2:
        raise ValueError("need the gold plus at least one negative")
    scores = np.array([head.score(x) for x in candidates])
    shift = scores.max()
    logz = shift + math.log(float(np.exp(scores - shift).sum()))
    probs = np.exp(scores - logz)
    loss = logz - scores[0]
    gw = np.zeros_like(head.w)
    coef = probs.copy()
    coef[0] -= 1.0
    for c, x in zip(coef, candidates):
        np.add.at(gw, x.ids, c * x.values)
    gb = float(coef.sum())
    if l2:
        loss += 0.5 * l2 * float(head.w @ head.w)
        gw += l2 * head.w
    return float(loss), LinearHead(gw, gb)


_LM_GROUPS = ("emb", "W_h", "b_h", "W_o", "b_o")


@dataclass
class NeuralLM:
    """Fixed-window feed-forward LM: concat embeddings -> tanh -> affine -> softmax."""

    emb: np.ndarray  # V x d
    W_h: np.ndarray  # (N*d) x h
    b_h: np.ndarray  # h
    W_o: np.ndarray  # h x V
    b_o: np.ndarray  # V
    window: int

    @classmethod
    def init(
        cls,
        vocab_size: int,
        window: int = 8,
        emb_dim: int = 32,
        hidden: int = 64,
        scale: float = 0.05,
        seed: int = 0,
        zero_output: bool = False,
    ) -> "NeuralLM":
        if window < 1:
            raise ValueError("window must be >= 1")
        rng = np.random.default_rng(seed)
        emb = rng.uniform(-scale, scale, (vocab_size, emb_dim))
        W_h = rng.uniform(-scale, scale, (window * emb_dim, hidden))
        W_o = rng.uniform(-scale, scale, (hidden, vocab_size))
        if zero_output:
            W_o[:] = 0.0
        return cls(emb, W_h, np.zeros(hidden), W_o, np.zeros(vocab_size), window)

    @property
    def vocab_size(self) -> int:
        return self.emb.shape[0]

    @property
    def emb_dim(self) -> int:
        return self.emb.shape[1]

    @property
    def hidden(self) -> int:
        return self.W_h.shape[1]

    def groups(self) -> dict[str, np.ndarray]:
        return {g: getattr(self, g) for g in _LM_GROUPS}

    def copy(self) -> "NeuralLM":
        return NeuralLM(*(a.copy() for a in self.groups().values()), self.window)

    def zeros_like(self) -> "NeuralLM":
        return NeuralLM(*(np.zeros_like(a) for a in self.groups().values()), self.window)

    def step(self, grad: "NeuralLM", lr: float) -> None:
        for g in _LM_GROUPS:
            getattr(self, g)[...] -= lr * getattr(grad, g)

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.groups().values())

    def same_as(self, other: "NeuralLM") -> bool:
        return self.window == other.window and all(
            np.array_equal(a, b) for a, b in zip(self.groups().values(), other.groups().values())
        )

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(b"KGDNLM1\0")
            f.write(struct.pack("<4Q", self.vocab_size, self.window, self.emb_dim, self.hidden))
            for a in self.groups().values():
                f.write(np.ascontiguousarray(a).astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "NeuralLM":
        with open(path, "rb") as f:
            blob = f.read()
        if blob[:8] != b"KGDNLM1\0":
            raise ValueError(f"{path}: not a neural-LM checkpoint")
        V, N, d, h = struct.unpack_from("<4Q", blob, 8)
        shapes = [(V, d), (N * d, h), (h,), (h, V), (V,)]
        arrays, offset = [], 40
        for shape in shapes:
            count = int(np.prod(shape))
            a = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
            arrays.append(a.astype(np.float64).reshape(shape))
            offset += 8 * count
        return cls(*arrays, window=N)


LOG_TINY = math.log(np.finfo(np.float64).tiny)


def _windows(seq: Sequence[int], positions: Sequence[int], N: int, pad_id: int) -> np.ndarray:
    padded = [pad_id] * N + list(seq)
    # position t is predicted from seq[t-N:t], i.e. padded[t:t+N]
    return np.array([padded[t : t + N] for t in positions], dtype=np.int64).reshape(len(positions), N)


def _forward(lm: NeuralLM, windows: np.ndarray):
    X = lm.emb[windows].reshape(len(windows), -1)
    H = np.tanh(X @ lm.W_h + lm.b_h)
    logits = H @ lm.W_o + lm.b_o
    logits -= logits.max(axis=1, keepdims=True)
    logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    return X, H, logp


def lm_forward(lm: NeuralLM, window: Sequence[int], pad_id: int = 8) -> np.ndarray:
    """Next-token distribution given the last N ids (left-padded with ``pad_id``)."""
    window = list(window)[-lm.window :]
    window = [pad_id] * (lm.window - len(window)) + window
    _, _, logp = _forward(lm, np.array([window], dtype=np.int64))
    return np.exp(logp[0])


def lm_nll_grad(
    lm: NeuralLM,
    sequence: Sequence[int],
    start: int = 1,
    l2: float = 0.0,
    pad_id: int = 8,
    need_grad: bool = True,
) -> tuple[float, Optional[NeuralLM]]:
    """Summed -log p(x_t | previous N ids) over positions t >= max(start, 1).

    Earlier positions are conditioned on but never predicted. L2 applies to
    the weight matrices and embeddings, not the biases.
    """
    return lm_batch_nll_grad(lm, [(sequence, start)], l2, pad_id, need_grad)


def lm_batch_nll_grad(
    lm: NeuralLM,
    batch: Sequence[tuple[Sequence[int], int]],
    l2: float = 0.0,
    pad_id: int = 8,
    need_grad: bool = True,
) -> tuple[float, Optional[NeuralLM]]:
    """``lm_nll_grad`` summed over ``(sequence, start)`` pairs in one stacked pass."""
    wins, targets = [], []
    for sequence, start in batch:
        if len(sequence) < 2:
            raise ValueError("sequence must hold at least two ids")
        positions = range(max(start, 1), len(sequence))
        if len(positions):
            wins.append(_windows(sequence, positions, lm.window, pad_id))
            targets.extend(sequence[t] for t in positions)
    loss = 0.0
    grad = lm.zeros_like() if need_grad else None
    if targets:
        wins = np.concatenate(wins)
        targets = np.asarray(targets, dtype=np.int64)
        X, H, logp = _forward(lm, wins)
        rows = np.arange(len(targets))
        picked = logp[rows, targets]
        # a target probability that underflows a double is reported as infinite loss
        loss = -float(picked.sum()) if picked.min() >= LOG_TINY else math.inf
        if need_grad:
            dlogits = np.exp(logp)
            dlogits[rows, targets] -= 1.0
            grad.W_o[...] = H.T @ dlogits
            grad.b_o[...] = dlogits.sum(axis=0)
            dpre = (dlogits @ lm.W_o.T) * (1.0 - H * H)
            grad.W_h[...] = X.T @ dpre
            grad.b_h[...] = dpre.sum(axis=0)
            dX = (dpre @ lm.W_h.T).reshape(len(targets), lm.window, lm.emb_dim)
            np.add.at(grad.emb, wins, dX)
    if l2:
        for g in ("emb", "W_h", "W_o"):
            a = getattr(lm, g)
            loss += 0.5 * l2 * float((a * a).sum())
            if need_grad:
                getattr(grad, g)[...] += l2 * a
    return loss, grad


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.1
    epochs: int = 10
    batch_size: int = 32
    l2: float = 0.0
    seed: int = 0
    init_scale: float = 0.05

    def __post_init__(self):
        if self.lr < 0 or not math.isfinite(self.lr):
            raise ValueError("learning rate must be finite and non-negative")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.l2 < 0 or self.init_scale <= 0:
            raise ValueError("l2 must be >= 0 and init_scale > 0")


Params = Union[LinearHead, NeuralLM]
LossGrad = Callable[[Params, Sequence], tuple[float, Params]]


def sgd_train(
    params: Params,
    data: Union[Sequence, Callable[[int], Sequence]],
    config: TrainConfig,
    loss_grad: LossGrad,
) -> tuple[Params, list[float]]:
    """Mini-batch SGD; each step moves by lr times the batch-mean gradient.

    ``data`` may be a callable returning the examples for a given epoch
    (used to redraw negatives). Returns the parameters (updated in place)
    and the per-epoch mean loss per example.
    """
    rng = np.random.default_rng(config.seed)
    trace: list[float] = []
    for epoch in range(config.epochs):
        examples = data(epoch) if callable(data) else data
        n = len(examples)
        if n == 0:
            trace.append(0.0)
            continue
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            batch = [examples[i] for i in order[lo : lo + config.batch_size]]
            loss, grad = loss_grad(params, batch)
            if not math.isfinite(loss):
                raise DivergedError(f"non-finite loss at epoch {epoch}")
            params.step(grad, config.lr / len(batch))
            if not params.is_finite():
                raise DivergedError(f"non-finite parameters at epoch {epoch}")
            total += loss
        trace.append(total / n)
    return params, trace


def save_trace(trace: Sequence[float], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "loss"])
        for i, loss in enumerate(trace):
            writer.writerow([i, repr(float(loss))])


def load_trace(path) -> list[float]:
    with open(path, newline="") as f:
        return [float(row["loss"]) for row in csv.DictReader(f)]
