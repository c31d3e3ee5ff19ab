"""Command-line front end: ``kgd <subcommand>``.

Exit codes: 0 success, 1 runtime or IO error, 2 usage or configuration error.
Every command that writes files also writes ``run_meta.json`` (flags, seeds,
input checksums) next to its outputs. ``KGD_SEED`` overrides ``--seed``.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from pathlib import Path
from typing import Callable, Optional

from . import __version__
from .corpus import (
    DialogueContext,
    Speaker,
    Turn,
    TurnLabel,
    load_corpus,
    load_knowledge,
    read_json,
    save_corpus,
    save_labels,
    write_json,
    load_logs,
)
from .datagen import NoiseConfig, build_training_corpus, load_noise_config
from .detection import DEFAULT_THRESHOLD, detect, train_detector
from .errors import KgdError
from .generation import (
    Phase,
    PhaseTag,
    TrainingPhasePlan,
    build_gen_prompt,
    build_generator_vocab,
    examples_from_corpus,
    generate,
    train_generator,
)
from .metrics import evaluate_pipeline
from .models import DEFAULT_DIM, LinearHead, NeuralLM, TrainConfig, save_trace
from .negsampler import SamplerConfig
from .selection import SelectionFeaturizer, rank_knowledge, train_selector
from .textproc import Vocabulary

DETECTOR_FILE = "detect.bin"
SELECTOR_FILE = "select.bin"
GENERATOR_FILE = "generate.bin"
VOCAB_FILE = "generate.vocab"
META_FILE = "run_meta.json"


class UsageError(Exception):
    """Bad flags or configuration (exit code 2)."""


# ---- helpers ---------------------------------------------------------------

def resolve_seed(args) -> tuple[int, str]:
    env = os.environ.get("KGD_SEED", "").strip()
    if env:
        try:
            return int(env), "KGD_SEED"
        except ValueError:
            raise UsageError(f"KGD_SEED must be an integer, got {env!r}") from None
    return args.seed, "--seed"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"cannot read {what}: {p}")
    return p


def write_meta(out_dir: Path, args, seed: int, seed_source: str, inputs: dict[str, Path], extra=None) -> None:
    """Record this run under its command name in ``out_dir/run_meta.json``.

    Entries of other commands sharing the directory (e.g. the three trainers
    writing one model dir) are kept.
    """
    flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func" and not k.startswith("_")}
    meta = {
        "version": __version__,
        "seed": seed,
        "seed_source": seed_source,
        "flags": flags,
        "inputs": {name: {"path": str(p), "sha256": sha256_file(p)} for name, p in sorted(inputs.items())},
    }
    if extra:
        meta.update(extra)
    path = out_dir / META_FILE
    runs = read_json(path) if path.exists() else {}
    if not isinstance(runs, dict):
        runs = {}
    runs[args.command] = meta
    write_json(dict(sorted(runs.items())), path)


def make_config(build: Callable):
    """Run a config constructor, turning validation failures into usage errors."""
    try:
        return build()
    except ValueError as e:
        raise UsageError(str(e)) from None


def train_config(args, seed: int) -> TrainConfig:
    return make_config(lambda: TrainConfig(
        lr=args.lr, epochs=args.epochs, batch_size=args.batch_size, l2=args.l2, seed=seed,
    ))


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def corpus_dir_files(path: Path) -> tuple[Path, Path]:
    return require_file(path / "logs.json", "logs"), require_file(path / "labels.json", "labels")


# ---- build-data ------------------------------------------------------------

def cmd_build_data(args) -> int:
    if args.per_snippet < 1:
        raise UsageError("--per-snippet must be >= 1")
    seed, source = resolve_seed(args)
    inputs = {
        "source_logs": require_file(args.source_logs, "source logs"),
        "source_labels": require_file(args.source_labels, "source labels"),
        "source_knowledge": require_file(args.source_knowledge, "source knowledge"),
        "target_knowledge": require_file(args.target_knowledge, "target knowledge"),
    }
    if args.noise_config:
        inputs["noise_config"] = require_file(args.noise_config, "noise config")
        noise = make_config(lambda: load_noise_config(inputs["noise_config"]))
    else:
        noise = NoiseConfig(seed=seed)
    source_store = load_knowledge(inputs["source_knowledge"])
    target_store = load_knowledge(inputs["target_knowledge"])
    source_corpus = load_corpus(inputs["source_logs"], inputs["source_labels"], source_store)
    corpus = build_training_corpus(
        source_corpus, source_store, target_store, noise,
        per_snippet=args.per_snippet, seed=seed, domain_matched=args.domain_matched,
    )
    out = ensure_dir(args.out_dir)
    save_corpus(corpus, out / "logs.json", out / "labels.json")
    write_meta(out, args, seed, source, inputs, {"noise": noise.to_json()})
    print(f"wrote {len(corpus.contexts)} dialogues to {out}")
    return 0


# ---- training --------------------------------------------------------------

def _load_training_corpus(args):
    inputs = {
        "logs": require_file(args.logs, "logs"),
        "labels": require_file(args.labels, "labels"),
        "knowledge": require_file(args.knowledge, "knowledge"),
    }
    store = load_knowledge(inputs["knowledge"])
    return store, load_corpus(inputs["logs"], inputs["labels"], store), inputs


def cmd_train_detect(args) -> int:
    seed, source = resolve_seed(args)
    config = train_config(args, seed)
    _, corpus, inputs = _load_training_corpus(args)
    head, trace = train_detector(corpus, config, args.dim, args.max_tokens)
    out = ensure_dir(args.out_dir)
    head.save(out / DETECTOR_FILE)
    save_trace(trace, out / "detect_trace.csv")
    write_meta(out, args, seed, source, inputs)
    print(out / DETECTOR_FILE)
    return 0


def cmd_train_select(args) -> int:
    seed, source = resolve_seed(args)
    config = train_config(args, seed)
    sampler = make_config(lambda: SamplerConfig(
        weights=SamplerConfig.parse_weights(args.neg_weights), k=args.k, sim_pool_size=args.sim_pool_size,
        seed=seed, exact_ratio=args.exact_ratio,
    ))
    store, corpus, inputs = _load_training_corpus(args)
    make_config(lambda: sampler.check_store(store))
    head, trace = train_selector(corpus, store, sampler, config, args.dim, args.max_tokens)
    out = ensure_dir(args.out_dir)
    head.save(out / SELECTOR_FILE)
    save_trace(trace, out / "select_trace.csv")
    write_meta(out, args, seed, source, inputs)
    print(out / SELECTOR_FILE)
    return 0


PLAN_KEYS = {"corpus", "epochs", "lr", "tag"}


def load_plan(path: Path, knowledge: Path, inputs: dict) -> TrainingPhasePlan:
    """Read a phase plan; corpus paths are relative to the plan file.

    ``post_train`` corpora are plain-text files (one utterance per line);
    ``fine_tune`` / ``style_transfer`` corpora are directories holding
    logs.json and labels.json grounded in ``knowledge``.
    """
    entries = read_json(path)
    if not isinstance(entries, list) or not entries:
        raise UsageError("phase plan must be a non-empty JSON list")
    store = None
    phases = []
    for pos, entry in enumerate(entries):
        if not isinstance(entry, dict) or not PLAN_KEYS <= set(entry):
            raise UsageError(f"plan entry {pos} needs keys {sorted(PLAN_KEYS)}")
        try:
            tag = PhaseTag(entry["tag"])
        except ValueError:
            raise UsageError(f"plan entry {pos}: unknown tag {entry['tag']!r}") from None
        epochs, lr = entry["epochs"], entry["lr"]
        if not isinstance(epochs, int) or epochs < 0 or not isinstance(lr, (int, float)) or lr < 0:
            raise UsageError(f"plan entry {pos}: epochs must be an integer >= 0 and lr >= 0")
        corpus_path = (path.parent / entry["corpus"]).resolve()
        if tag is PhaseTag.POST_TRAIN:
            inputs[f"phase{pos}"] = require_file(corpus_path, "post-training corpus")
            with open(corpus_path, encoding="utf-8") as f:
                data = [line.rstrip("\n") for line in f if line.strip()]
        else:
            logs, labels = corpus_dir_files(corpus_path)
            inputs[f"phase{pos}_logs"], inputs[f"phase{pos}_labels"] = logs, labels
            if store is None:
                store = load_knowledge(knowledge)
            data = examples_from_corpus(load_corpus(logs, labels, store), store)
        phases.append(Phase(tag, data, epochs, float(lr), name=str(entry["corpus"])))
    return TrainingPhasePlan(phases)


def cmd_train_generate(args) -> int:
    seed, source = resolve_seed(args)
    config = make_config(lambda: TrainConfig(batch_size=args.batch_size, l2=args.l2, seed=seed))
    inputs = {
        "plan": require_file(args.plan, "phase plan"),
        "knowledge": require_file(args.knowledge, "knowledge"),
    }
    plan = load_plan(inputs["plan"], inputs["knowledge"], inputs)
    vocab = build_generator_vocab(plan, args.min_freq, args.max_vocab)
    lm = make_config(lambda: NeuralLM.init(
        len(vocab), window=args.window, emb_dim=args.emb_dim, hidden=args.hidden,
        scale=args.init_scale, seed=seed,
    ))
    lm, traces = train_generator(lm, plan, vocab, config, args.max_tokens)
    out = ensure_dir(args.out_dir)
    lm.save(out / GENERATOR_FILE)
    vocab.save(out / VOCAB_FILE)
    for pos, (tag, trace) in enumerate(traces):
        save_trace(trace, out / f"generate_trace_{pos}_{tag.value}.csv")
    write_meta(out, args, seed, source, inputs, {"phases": [t.value for t, _ in traces]})
    print(out / GENERATOR_FILE)
    return 0


# ---- inference -------------------------------------------------------------

class Pipeline:
    """Detection, then top-1 selection, then generation for one context."""

    def __init__(self, store, detector: LinearHead, selector: LinearHead, lm: NeuralLM, vocab: Vocabulary, args):
        self.store = store
        self.detector = detector
        self.selector = selector
        self.lm = lm
        self.vocab = vocab
        self.threshold = args.threshold
        self.top_k = args.top_k
        self.max_tokens = args.max_tokens
        self.gen_max_tokens = args.gen_max_tokens
        self.max_len = args.max_len
        self.filter_domain = args.filter_domain
        self.featurizer = SelectionFeaturizer(store, selector.dim, args.max_tokens)

    def run(self, context: DialogueContext):
        """(detection score, ranking or None, response or None)."""
        is_target, score = detect(self.detector, context, self.threshold, self.max_tokens)
        if not is_target:
            return score, None, None
        ranking = rank_knowledge(
            self.selector, context, self.store, self.top_k, self.featurizer, self.filter_domain
        )
        if not ranking.entries:
            return score, ranking, None
        best = self.store.get(ranking.entries[0][0])
        prompt = build_gen_prompt(context, best.title, best.body, self.gen_max_tokens)
        return score, ranking, " ".join(generate(self.lm, prompt, self.vocab, self.max_len))


def model_paths(args) -> dict[str, Path]:
    base = Path(args.model_dir) if args.model_dir else None

    def pick(flag, name):
        if flag:
            return Path(flag)
        if base is None:
            raise UsageError(f"give --model-dir or an explicit path for {name}")
        return base / name

    return {
        "detector": pick(args.detector, DETECTOR_FILE),
        "selector": pick(args.selector, SELECTOR_FILE),
        "generator": pick(args.generator, GENERATOR_FILE),
        "vocab": pick(args.vocab, VOCAB_FILE),
    }


def load_pipeline(args, inputs: dict) -> Pipeline:
    paths = model_paths(args)
    for name, p in paths.items():
        inputs[name] = require_file(p, f"{name} checkpoint" if name != "vocab" else "generator vocabulary")
    inputs["knowledge"] = require_file(args.knowledge, "knowledge")
    store = load_knowledge(inputs["knowledge"])
    lm = NeuralLM.load(paths["generator"])
    vocab = Vocabulary.load(paths["vocab"])
    if lm.vocab_size != len(vocab):
        raise KgdError(f"generator has {lm.vocab_size} outputs but the vocabulary has {len(vocab)} entries")
    return Pipeline(store, LinearHead.load(paths["detector"]), LinearHead.load(paths["selector"]), lm, vocab, args)


def ranking_json(ranking) -> Optional[list]:
    if ranking is None:
        return None
    return [
        {"domain": d, "entity_id": e, "doc_id": doc, "score": score}
        for (d, e, doc), score in ranking.entries
    ]


def cmd_run_pipeline(args) -> int:
    seed, source = resolve_seed(args)
    inputs = {"logs": require_file(args.logs, "logs")}
    pipeline = load_pipeline(args, inputs)
    contexts = load_logs(inputs["logs"])
    labels, rankings = [], []
    for ctx in contexts:
        _, ranking, response = pipeline.run(ctx)
        if ranking is None or not ranking.entries:
            labels.append(TurnLabel(False).to_json())
        else:
            labels.append(TurnLabel(True, ranking.entries[0][0], response or "").to_json())
        rankings.append(ranking_json(ranking))
    out = ensure_dir(args.out_dir)
    save_labels(labels, out / "labels.json")
    write_json(rankings, out / "rankings.json")
    write_meta(out, args, seed, source, inputs)
    print(f"wrote {len(labels)} predictions to {out / 'labels.json'}")
    return 0


def _load_rankings(path: Path) -> list:
    raw = read_json(path)
    if not isinstance(raw, list):
        raise KgdError("rankings file must hold a JSON list")
    return [
        None if r is None else [(x["domain"], str(x["entity_id"]), str(x["doc_id"])) for x in r]
        for r in raw
    ]


def cmd_evaluate(args) -> int:
    seed, source = resolve_seed(args)
    inputs = {
        "predictions": require_file(args.predictions, "predictions"),
        "gold": require_file(args.gold, "gold labels"),
    }
    rankings = None
    if args.rankings:
        inputs["rankings"] = require_file(args.rankings, "rankings")
        rankings = _load_rankings(inputs["rankings"])
    preds, golds = read_json(inputs["predictions"]), read_json(inputs["gold"])
    if not isinstance(preds, list) or not isinstance(golds, list):
        raise KgdError("label files must hold JSON lists")
    report = evaluate_pipeline(preds, golds, rankings, args.mode)
    sys.stdout.write(report.table())
    if args.out_dir:
        out = ensure_dir(args.out_dir)
        (out / "report.json").write_text(report.to_json(), encoding="utf-8")
        (out / "report.txt").write_text(report.table(), encoding="utf-8")
        write_meta(out, args, seed, source, inputs)
    return 0


def cmd_chat(args, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    resolve_seed(args)
    pipeline = load_pipeline(args, {})
    interactive = stdin.isatty()
    turns: list[Turn] = []
    while True:
        if interactive:
            stdout.write("you> ")
            stdout.flush()
        line = stdin.readline()
        if not line:
            break
        text = line.strip()
        if not text:
            continue
        if text == "/quit":
            break
        if text == "/reset":
            turns = []
            stdout.write("(context cleared)\n")
            continue
        turns.append(Turn(Speaker.USER, text))
        score, ranking, response = pipeline.run(DialogueContext(tuple(turns)))
        stdout.write(f"user: {text}\n")
        stdout.write(f"detection: {score:.4f}\n")
        if ranking is None:
            stdout.write("no external knowledge needed\n")
            continue
        for rank, (ref, s) in enumerate(ranking.entries, start=1):
            snip = pipeline.store.get(ref)
            stdout.write(f"  {rank}. {s:+.4f} {'/'.join(ref)} {snip.title}\n")
        stdout.write(f"system: {response}\n")
        if response:
            turns.append(Turn(Speaker.SYSTEM, response))
    return 0


# ---- parser ----------------------------------------------------------------

def _add_seed(p) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (KGD_SEED overrides)")


def _add_train(p, epochs: int, lr: float, batch_size: int) -> None:
    p.add_argument("--logs", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--knowledge", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epochs", type=int, default=epochs)
    p.add_argument("--lr", type=float, default=lr)
    p.add_argument("--batch-size", type=int, default=batch_size)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--dim", type=int, default=DEFAULT_DIM, help="hashed feature dimension")
    p.add_argument("--max-tokens", type=int, default=256)
    _add_seed(p)


def _add_models(p) -> None:
    p.add_argument("--knowledge", required=True)
    p.add_argument("--model-dir", help=f"directory holding {DETECTOR_FILE}, {SELECTOR_FILE}, {GENERATOR_FILE}, {VOCAB_FILE}")
    p.add_argument("--detector")
    p.add_argument("--selector")
    p.add_argument("--generator")
    p.add_argument("--vocab")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--max-tokens", type=int, default=256, help="detection/selection input budget")
    p.add_argument("--gen-max-tokens", type=int, default=128, help="generation prompt budget")
    p.add_argument("--max-len", type=int, default=60, help="maximum generated tokens")
    p.add_argument("--filter-domain", default=None, help="rank only snippets of this domain")
    _add_seed(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgd", description="Knowledge-grounded dialogue toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-data", help="synthesize noisy training dialogues for a target knowledge store")
    p.add_argument("--source-logs", required=True)
    p.add_argument("--source-labels", required=True)
    p.add_argument("--source-knowledge", required=True)
    p.add_argument("--target-knowledge", required=True)
    p.add_argument("--per-snippet", type=int, default=1)
    p.add_argument("--noise-config", default=None, help="noise config JSON (defaults if omitted)")
    p.add_argument("--domain-matched", action="store_true", help="draw templates from the snippet's domain")
    p.add_argument("--out-dir", required=True)
    _add_seed(p)
    p.set_defaults(func=cmd_build_data, _parser=p)

    p = sub.add_parser("train-detect", help="train the knowledge-seeking turn detector")
    _add_train(p, epochs=20, lr=0.1, batch_size=32)
    p.set_defaults(func=cmd_train_detect, _parser=p)

    p = sub.add_parser("train-select", help="train the knowledge selector with weighted negatives")
    _add_train(p, epochs=5, lr=0.1, batch_size=1)
    p.add_argument("--neg-weights", default="2,1,2,2", help="random,in-entity,in-domain,similar")
    p.add_argument("--k", type=int, default=4, help="negatives per positive")
    p.add_argument("--sim-pool-size", type=int, default=10)
    p.add_argument("--exact-ratio", action="store_true", help="allocate category counts deterministically")
    p.set_defaults(func=cmd_train_select, _parser=p)

    p = sub.add_parser("train-generate", help="train the response generator on a phase plan")
    p.add_argument("--plan", required=True, help='JSON list of {"corpus","epochs","lr","tag"}')
    p.add_argument("--knowledge", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--emb-dim", type=int, default=32)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--init-scale", type=float, default=0.05)
    p.add_argument("--min-freq", type=int, default=1)
    p.add_argument("--max-vocab", type=int, default=5000)
    p.add_argument("--max-tokens", type=int, default=128)
    _add_seed(p)
    p.set_defaults(func=cmd_train_generate, _parser=p)

    p = sub.add_parser("run-pipeline", help="detect, select and generate for every dialogue in a logs file")
    p.add_argument("--logs", required=True)
    p.add_argument("--out-dir", required=True)
    _add_models(p)
    p.set_defaults(func=cmd_run_pipeline, _parser=p)

    p = sub.add_parser("evaluate", help="score predicted labels against gold labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--rankings", default=None)
    p.add_argument("--mode", choices=("gold", "cascade"), default="gold")
    p.add_argument("--out-dir", default=None)
    _add_seed(p)
    p.set_defaults(func=cmd_evaluate, _parser=p)

    p = sub.add_parser("chat", help="interactive loop over stdin; /reset clears context, /quit exits")
    _add_models(p)
    p.set_defaults(func=cmd_chat, _parser=p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        getattr(args, "_parser", parser).print_usage(sys.stderr)
        print(f"kgd {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (KgdError, OSError, ValueError) as e:
        print(f"kgd {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
