"""Knowledge-grounded response generation with a phased training schedule.

A schedule is a list of phases run in order on one parameter set. Post-training
phases model every token of plain-text lines; fine-tuning and style-transfer
phases predict only the response (plus its closing ``[EOS]``) after a
``[BOS] [know] k_r [user] u_1 ...`` prompt.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .corpus import Corpus, DialogueContext, KnowledgeSnippet, KnowledgeStore
from .detection import speaker_marker, fit_turns
from .errors import VocabMismatch
from .models import NeuralLM, TrainConfig, lm_batch_nll_grad, lm_forward, sgd_train
from .textproc import BOS, EOS, KNOW, MARKERS, PAD, SPECIAL_TOKENS, Vocabulary, build_vocab, tokenize

DEFAULT_MAX_TOKENS = 128
DEFAULT_MAX_LEN = 60
MAX_UNK_FRACTION = 0.5


class PhaseTag(str, enum.Enum):
    POST_TRAIN = "post_train"
    FINE_TUNE = "fine_tune"
    STYLE_TRANSFER = "style_transfer"


@dataclass(frozen=True)
class GenExample:
    context: DialogueContext
    title: str
    body: str
    response: str

    @classmethod
    def from_snippet(cls, context: DialogueContext, snippet: KnowledgeSnippet, response: str) -> "GenExample":
        return cls(context, snippet.title, snippet.body, response)


def examples_from_corpus(corpus: Corpus, store: KnowledgeStore) -> list[GenExample]:
    return [
        GenExample.from_snippet(c, store.get(lab.gold), lab.response)
        for c, lab in zip(corpus.contexts, corpus.labels)
        if lab.target
    ]


@dataclass(frozen=True)
class GenPrompt:
    tokens: tuple[str, ...]

    @property
    def response_start(self) -> int:
        return len(self.tokens)

    def ids(self, vocab: Vocabulary) -> list[int]:
        return vocab.encode(self.tokens)


def build_gen_prompt(
    context: DialogueContext, title: str, body: str, max_tokens: int = DEFAULT_MAX_TOKENS
) -> GenPrompt:
    """``[BOS] [know] title body [user] u_1 [sys] s_2 ... [user] u_m``.

    Knowledge is never truncated; the dialogue gets what is left of the
    budget (at least one marker plus one token).
    """
    know = tokenize(title) + tokenize(body)
    segments = [[speaker_marker(t.speaker)] + tokenize(t.text) for t in context.turns]
    budget = max(max_tokens - 2 - len(know), 2)
    kept = fit_turns(segments, budget)
    return GenPrompt(tuple([BOS, KNOW] + know + [tok for seg in kept for tok in seg]))


def prompt_for(example: GenExample, max_tokens: int = DEFAULT_MAX_TOKENS) -> GenPrompt:
    return build_gen_prompt(example.context, example.title, example.body, max_tokens)


@dataclass
class Phase:
    tag: PhaseTag
    data: Union[Sequence[str], Sequence[GenExample]]
    epochs: int
    lr: float
    name: str = ""

    def __post_init__(self):
        self.tag = PhaseTag(self.tag)


@dataclass
class TrainingPhasePlan:
    phases: list[Phase] = field(default_factory=list)

    def __post_init__(self):
        if not self.phases:
            raise ValueError("a training plan needs at least one phase")

    @property
    def tags(self) -> list[PhaseTag]:
        return [p.tag for p in self.phases]


def phase_texts(phase: Phase) -> Iterable[str]:
    if phase.tag is PhaseTag.POST_TRAIN:
        yield from phase.data
    else:
        for ex in phase.data:
            for t in ex.context.turns:
                yield t.text
            yield ex.title
            yield ex.body
            yield ex.response


def build_generator_vocab(plan: TrainingPhasePlan, min_freq: int = 1, max_size: int = 5000) -> Vocabulary:
    return build_vocab((t for p in plan.phases for t in phase_texts(p)), min_freq, max_size)


def encode_example(example: GenExample, vocab: Vocabulary, max_tokens: int = DEFAULT_MAX_TOKENS):
    """(ids, response_start): prompt, then response tokens and a closing [EOS]."""
    prompt = prompt_for(example, max_tokens)
    ids = prompt.ids(vocab) + vocab.encode(tokenize(example.response)) + [vocab.stoi[EOS]]
    return ids, prompt.response_start


def encode_line(line: str, vocab: Vocabulary):
    return [vocab.stoi[BOS]] + vocab.encode(tokenize(line)) + [vocab.stoi[EOS]], 1


def encode_phase(phase: Phase, vocab: Vocabulary, max_tokens: int = DEFAULT_MAX_TOKENS) -> list:
    if phase.tag is PhaseTag.POST_TRAIN:
        seqs = [encode_line(line, vocab) for line in phase.data if tokenize(line)]
    else:
        seqs = [encode_example(ex, vocab, max_tokens) for ex in phase.data]
    _check_unknowns(seqs, vocab, phase.name or phase.tag.value)
    return seqs


def _check_unknowns(seqs, vocab: Vocabulary, name: str) -> None:
    special = set(range(len(SPECIAL_TOKENS))) - {vocab.unk_id}
    content = [i for ids, _ in seqs for i in ids if i not in special]
    if content and sum(i == vocab.unk_id for i in content) > MAX_UNK_FRACTION * len(content):
        raise VocabMismatch(f"corpus {name!r} is mostly out-of-vocabulary; wrong file?")


def train_generator(
    lm: NeuralLM,
    plan: TrainingPhasePlan,
    vocab: Vocabulary,
    config: TrainConfig = TrainConfig(lr=0.05, batch_size=32),
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> tuple[NeuralLM, list[tuple[PhaseTag, list[float]]]]:
    """Run the phases in order; returns the LM and one (tag, loss trace) per phase.

    Each phase overrides ``epochs`` and ``lr`` of ``config`` and draws its
    shuffling seed from (config.seed, phase position).
    """
    if lm.vocab_size != len(vocab):
        raise ValueError(f"LM vocabulary size {lm.vocab_size} != vocabulary size {len(vocab)}")
    pad = vocab.stoi[PAD]
    traces = []
    for pos, phase in enumerate(plan.phases):
        seqs = encode_phase(phase, vocab, max_tokens)
        phase_cfg = dataclasses.replace(
            config, epochs=phase.epochs, lr=phase.lr, seed=config.seed * 1000 + pos
        )
        loss_grad = lambda m, batch: lm_batch_nll_grad(m, batch, config.l2, pad)
        _, trace = sgd_train(lm, seqs, phase_cfg, loss_grad)
        traces.append((phase.tag, trace))
    return lm, traces


def style_transfer_phase(
    lm: NeuralLM,
    style_corpus: Sequence[GenExample],
    vocab: Vocabulary,
    epochs: int = 10,
    lr: float = 0.05,
    config: TrainConfig = TrainConfig(lr=0.05, batch_size=32),
) -> NeuralLM:
    """Append one style-transfer phase on ``style_corpus``; empty corpora leave ``lm`` untouched."""
    if not style_corpus:
        return lm
    plan = TrainingPhasePlan([Phase(PhaseTag.STYLE_TRANSFER, list(style_corpus), epochs, lr)])
    train_generator(lm, plan, vocab, config)
    return lm


def generate(
    lm: NeuralLM, prompt: GenPrompt, vocab: Vocabulary, max_len: int = DEFAULT_MAX_LEN
) -> list[str]:
    """Greedy decoding (lowest id wins ties) until [EOS] or ``max_len`` tokens."""
    ids = prompt.ids(vocab)
    eos, pad = vocab.stoi[EOS], vocab.stoi[PAD]
    banned = [vocab.stoi[t] for t in SPECIAL_TOKENS if t != EOS]
    out: list[int] = []
    for _ in range(max_len):
        probs = lm_forward(lm, ids[-lm.window :], pad)
        probs[banned] = -1.0
        nxt = int(np.argmax(probs))
        if nxt == eos:
            break
        out.append(nxt)
        ids.append(nxt)
    return vocab.decode(out)


def response_nll(
    lm: NeuralLM, examples: Sequence[GenExample], vocab: Vocabulary, max_tokens: int = DEFAULT_MAX_TOKENS
) -> float:
    """Mean per-token negative log-likelihood of the responses (with their [EOS])."""
    seqs = [encode_example(ex, vocab, max_tokens) for ex in examples]
    loss, _ = lm_batch_nll_grad(lm, seqs, pad_id=vocab.stoi[PAD], need_grad=False)
    n_tokens = sum(len(ids) - start for ids, start in seqs)
    return loss / max(n_tokens, 1)


def strip_markers(tokens: Sequence[str]) -> list[str]:
    return [t for t in tokens if t not in MARKERS]
