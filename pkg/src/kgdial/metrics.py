"""Detection, selection and generation metrics, and report assembly.

BLEU is corpus-level without smoothing. METEOR here is a lightweight variant:
exact then suffix-stem alignment, alpha=0.9, beta=3, gamma=0.5, no synonyms.
Scores are comparable across runs of this toolkit, not with other scorers.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from .errors import EmptyReference, LengthMismatch
from .textproc import lcs_length, ngrams, tokenize

STEM_SUFFIXES = ("ing", "es", "ed", "s")
METEOR_ALPHA, METEOR_BETA, METEOR_GAMMA = 0.9, 3.0, 0.5


def _same_length(a: Sequence, b: Sequence) -> None:
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} predictions vs {len(b)} golds")


def prf1(predictions: Sequence[bool], golds: Sequence[bool]) -> tuple[float, float, float]:
    _same_length(predictions, golds)
    if not golds:
        raise ValueError("need at least one example")
    tp = sum(1 for p, g in zip(predictions, golds) if p and g)
    n_pred = sum(1 for p in predictions if p)
    n_gold = sum(1 for g in golds if g)
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def _rank_of(ranking: Optional[Sequence], gold) -> Optional[int]:
    if not ranking:
        return None
    try:
        return list(ranking).index(gold) + 1
    except ValueError:
        return None


def mrr_at_k(rankings: Sequence[Optional[Sequence]], golds: Sequence, k: int = 5) -> float:
    _same_length(rankings, golds)
    if k < 1:
        raise ValueError("k must be >= 1")
    if not golds:
        return 0.0
    total = 0.0
    for ranking, gold in zip(rankings, golds):
        rank = _rank_of(ranking, gold)
        if rank is not None and rank <= k:
            total += 1.0 / rank
    return total / len(golds)


def recall_at_k(rankings: Sequence[Optional[Sequence]], golds: Sequence, k: int) -> float:
    _same_length(rankings, golds)
    if k < 1:
        raise ValueError("k must be >= 1")
    if not golds:
        return 0.0
    hits = 0
    for ranking, gold in zip(rankings, golds):
        rank = _rank_of(ranking, gold)
        hits += rank is not None and rank <= k
    return hits / len(golds)


def _as_tokens(x) -> list[str]:
    return tokenize(x) if isinstance(x, str) else list(x)


def bleu(candidates: Sequence, reference_lists: Sequence[Sequence], max_n: int = 4) -> float:
    """Corpus BLEU with uniform weights over 1..max_n and the brevity penalty."""
    _same_length(candidates, reference_lists)
    if not 1 <= max_n <= 4:
        raise ValueError("max_n must be in 1..4")
    matched = [0] * max_n
    possible = [0] * max_n
    cand_len = ref_len = 0
    for cand, refs in zip(candidates, reference_lists):
        if not refs:
            raise EmptyReference("every candidate needs at least one reference")
        cand = _as_tokens(cand)
        refs = [_as_tokens(r) for r in refs]
        cand_len += len(cand)
        # closest reference length, shorter one on ties
        ref_len += min((abs(len(r) - len(cand)), len(r)) for r in refs)[1]
        for n in range(1, max_n + 1):
            counts = ngrams(cand, n)
            max_ref: Counter = Counter()
            for r in refs:
                max_ref |= ngrams(r, n)
            matched[n - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            possible[n - 1] += max(len(cand) - n + 1, 0)
    if cand_len == 0 or any(m == 0 for m in matched):
        return 0.0
    log_p = sum(math.log(m / p) for m, p in zip(matched, possible)) / max_n
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return bp * math.exp(log_p)


def stem(token: str) -> str:
    for suffix in STEM_SUFFIXES:
        if token.endswith(suffix) and len(token) > len(suffix) + 1:
            return token[: -len(suffix)]
    return token


def meteor_alignment(cand: Sequence[str], ref: Sequence[str]) -> list[tuple[int, int]]:
    """Greedy left-to-right alignment: exact matches first, then stem matches."""
    pairs: dict[int, int] = {}
    used: set[int] = set()
    for key in (lambda t: t, stem):
        ref_keys = [key(t) for t in ref]
        for i, tok in enumerate(cand):
            if i in pairs:
                continue
            k = key(tok)
            for j, rk in enumerate(ref_keys):
                if j not in used and rk == k:
                    pairs[i] = j
                    used.add(j)
                    break
    return sorted(pairs.items())


def count_chunks(alignment: Sequence[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in alignment:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_lite(candidate, reference) -> float:
    cand, ref = _as_tokens(candidate), _as_tokens(reference)
    if not ref:
        raise EmptyReference("reference is empty")
    alignment = meteor_alignment(cand, ref)
    m = len(alignment)
    if m == 0:
        return 0.0
    p, r = m / len(cand), m / len(ref)
    f = p * r / (METEOR_ALPHA * p + (1 - METEOR_ALPHA) * r)
    penalty = METEOR_GAMMA * (count_chunks(alignment) / m) ** METEOR_BETA
    return f * (1.0 - penalty)


def _f1(overlap: float, n_cand: int, n_ref: int) -> float:
    p = overlap / n_cand if n_cand else 0.0
    r = overlap / n_ref if n_ref else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0


def rouge_n(candidate, reference, n: int) -> float:
    cand, ref = _as_tokens(candidate), _as_tokens(reference)
    if not ref:
        raise EmptyReference("reference is empty")
    cg, rg = ngrams(cand, n), ngrams(ref, n)
    overlap = sum((cg & rg).values())
    return _f1(overlap, sum(cg.values()), sum(rg.values()))


def rouge_l(candidate, reference) -> float:
    cand, ref = _as_tokens(candidate), _as_tokens(reference)
    if not ref:
        raise EmptyReference("reference is empty")
    return _f1(lcs_length(cand, ref), len(cand), len(ref))


@dataclass
class MetricsReport:
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    mrr_at_5: float = 0.0
    recall_at_1: float = 0.0
    recall_at_5: float = 0.0
    bleu_1: float = 0.0
    bleu_2: float = 0.0
    bleu_3: float = 0.0
    bleu_4: float = 0.0
    meteor: float = 0.0
    rouge_1: float = 0.0
    rouge_2: float = 0.0
    rouge_l: float = 0.0
    selection_present: bool = True
    generation_present: bool = True
    mode: str = "gold"
    counts: dict = field(default_factory=dict)

    COLUMNS = (
        ("Precision", "precision"), ("Recall", "recall"), ("F1", "f1"),
        ("MRR@5", "mrr_at_5"), ("Recall@1", "recall_at_1"), ("Recall@5", "recall_at_5"),
        ("BLEU-1", "bleu_1"), ("BLEU-2", "bleu_2"), ("BLEU-3", "bleu_3"), ("BLEU-4", "bleu_4"),
        ("METEOR", "meteor"), ("ROUGE-1", "rouge_1"), ("ROUGE-2", "rouge_2"), ("ROUGE-L", "rouge_l"),
    )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=False) + "\n"

    def table(self) -> str:
        heads = [h for h, _ in self.COLUMNS]
        vals = [f"{getattr(self, a):.4f}" for _, a in self.COLUMNS]
        widths = [max(len(h), len(v)) for h, v in zip(heads, vals)]
        row = lambda cells: " | ".join(c.rjust(w) for c, w in zip(cells, widths))
        lines = [row(heads), "-+-".join("-" * w for w in widths), row(vals)]
        if not self.selection_present:
            lines.append("(selection: no scored turns, reported as 0)")
        if not self.generation_present:
            lines.append("(generation: no scored turns, reported as 0)")
        return "\n".join(lines) + "\n"


def _gold_ref(label: dict):
    k = label["knowledge"][0]
    return (k["domain"], str(k["entity_id"]), str(k["doc_id"]))


def evaluate_pipeline(
    pred_labels: Sequence[dict],
    gold_labels: Sequence[dict],
    rankings: Optional[Sequence[Optional[Sequence]]] = None,
    mode: str = "gold",
) -> MetricsReport:
    """Score predicted labels (labels.json shape) against gold labels.

    Selection/generation are scored on turns whose gold target is true
    (``mode="gold"``) or, in ``mode="cascade"``, on turns that are also
    predicted positive. A turn with no prediction counts as a miss.
    ``rankings`` holds per-turn ranked snippet refs; when absent the
    predicted top-1 knowledge is used.
    """
    _same_length(pred_labels, gold_labels)
    if rankings is not None:
        _same_length(rankings, gold_labels)
    if mode not in ("gold", "cascade"):
        raise ValueError("mode must be 'gold' or 'cascade'")
    report = MetricsReport(mode=mode)
    preds = [bool(p.get("target")) for p in pred_labels]
    golds = [bool(g.get("target")) for g in gold_labels]
    report.precision, report.recall, report.f1 = prf1(preds, golds)

    scored = [i for i, g in enumerate(golds) if g and (mode == "gold" or preds[i])]
    report.counts = {"turns": len(golds), "gold_targets": sum(golds), "scored": len(scored)}
    answered = [i for i in scored if preds[i]]
    report.selection_present = bool(answered)
    report.generation_present = bool(answered)
    if not scored:
        report.selection_present = report.generation_present = False
        return report

    def ranked(i: int) -> Optional[list]:
        if not preds[i]:
            return None
        if rankings is not None and rankings[i] is not None:
            return [tuple(r) for r in rankings[i]]
        know = pred_labels[i].get("knowledge")
        return [_gold_ref(pred_labels[i])] if know else None

    rank_lists = [ranked(i) for i in scored]
    gold_refs = [_gold_ref(gold_labels[i]) for i in scored]
    report.mrr_at_5 = mrr_at_k(rank_lists, gold_refs, 5)
    report.recall_at_1 = recall_at_k(rank_lists, gold_refs, 1)
    report.recall_at_5 = recall_at_k(rank_lists, gold_refs, 5)

    hyps = [tokenize(pred_labels[i].get("response", "") or "") if preds[i] else [] for i in scored]
    refs = [tokenize(gold_labels[i]["response"]) for i in scored]
    for n in range(1, 5):
        setattr(report, f"bleu_{n}", bleu(hyps, [[r] for r in refs], n))
    report.meteor = sum(meteor_lite(h, r) for h, r in zip(hyps, refs)) / len(scored)
    report.rouge_1 = sum(rouge_n(h, r, 1) for h, r in zip(hyps, refs)) / len(scored)
    report.rouge_2 = sum(rouge_n(h, r, 2) for h, r in zip(hyps, refs)) / len(scored)
    report.rouge_l = sum(rouge_l(h, r) for h, r in zip(hyps, refs)) / len(scored)
    return report
