#!/usr/bin/env python3
"""Regenerate the bundled fixtures under src/kgdial/fixtures/.

Usage:
  python scripts/make_fixtures.py [--out src/kgdial/fixtures]
"""

import argparse
from pathlib import Path

from kgdial import benchmarks
from kgdial.corpus import save_corpus, save_knowledge, write_json
from kgdial.datagen import NoiseConfig

PLAN = [
    {"corpus": "post_train.txt", "epochs": 5, "lr": 0.3, "tag": "post_train"},
    {"corpus": "train", "epochs": 5, "lr": 0.3, "tag": "fine_tune"},
    {"corpus": "style", "epochs": 5, "lr": 0.3, "tag": "style_transfer"},
]


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "src/kgdial/fixtures"))
    args = parser.parse_args()
    out = Path(args.out)

    store = benchmarks.fixture_store()
    save_knowledge(store, out / "knowledge_small.json")

    src = out / "source"
    src.mkdir(parents=True, exist_ok=True)
    save_knowledge(benchmarks.source_store(), src / "knowledge.json")
    save_corpus(benchmarks.source_corpus(), src / "logs.json", src / "labels.json")

    splits = {
        "train": benchmarks.dialogue_corpus(store, 160, seed=13, positive_rate=0.5),
        "eval": benchmarks.eval_corpus(),
        "style": benchmarks.dialogue_corpus(
            store, 60, seed=17, positive_rate=1.0, response=benchmarks.styled_response
        ),
    }
    for name, corpus in splits.items():
        d = out / name
        d.mkdir(exist_ok=True)
        save_corpus(corpus, d / "logs.json", d / "labels.json")

    lines = benchmarks.post_train_lines(store)
    lines += [t.text for ctx in splits["train"].contexts for t in ctx.turns]
    (out / "post_train.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_json(PLAN, out / "plan.json")
    write_json(NoiseConfig(seed=5).to_json(), out / "noise.json")
    print(f"fixtures written to {out}")


if __name__ == "__main__":
    main()
