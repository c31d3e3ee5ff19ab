"""Knowledge stores, dialogues and labels in the DSTC9/10 JSON layout.

knowledge.json::

    {"<domain>": {"<entity_id>": {"name": str | null,
                                  "docs": {"<doc_id>": {"title": str, "body": str}}}}}

logs.json is a list of turn lists (``{"speaker": "U" | "S", "text": str}``) and
labels.json a parallel list of ``{"target": bool, "knowledge": [ref], "response": str}``
objects, where ``knowledge``/``response`` are present only when ``target`` is true.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

from .errors import DanglingReference, EmptyStore, LengthMismatch, ParseError

SnippetRef = tuple[str, str, str]  # (domain, entity_id, doc_id)

DOMAIN_WIDE_ENTITY = "*"


@dataclass(frozen=True)
class KnowledgeSnippet:
    domain: str
    entity_id: str
    entity_name: str
    doc_id: str
    title: str
    body: str

    @property
    def ref(self) -> SnippetRef:
        return (self.domain, self.entity_id, self.doc_id)

    @property
    def text(self) -> str:
        return f"{self.title} {self.body}"


class KnowledgeStore:
    """Ordered snippet collection with domain and entity indexes.

    Snippet ids are positions in load order; every tie-break in the toolkit
    that mentions "snippet-id order" uses them.
    """

    def __init__(self, snippets: Iterable[KnowledgeSnippet]):
        self.snippets: tuple[KnowledgeSnippet, ...] = tuple(snippets)
        if not self.snippets:
            raise EmptyStore("knowledge store has no snippets")
        self._build_indexes()

    def _build_indexes(self) -> None:
        by_ref: dict[SnippetRef, int] = {}
        by_domain: dict[str, list[int]] = {}
        by_entity: dict[tuple[str, str], list[int]] = {}
        for i, s in enumerate(self.snippets):
            if s.ref in by_ref:
                raise ParseError(f"duplicate knowledge key {s.ref}")
            if not s.title.strip() or not s.body.strip():
                raise ParseError(f"empty title or body for {s.ref}")
            by_ref[s.ref] = i
            by_domain.setdefault(s.domain, []).append(i)
            by_entity.setdefault((s.domain, s.entity_id), []).append(i)
        self._by_ref = by_ref
        self.by_domain = {k: tuple(v) for k, v in by_domain.items()}
        self.by_entity = {k: tuple(v) for k, v in by_entity.items()}

    def __len__(self) -> int:
        return len(self.snippets)

    def __getitem__(self, idx: int) -> KnowledgeSnippet:
        return self.snippets[idx]

    def __iter__(self) -> Iterator[KnowledgeSnippet]:
        return iter(self.snippets)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, KnowledgeStore) and self.snippets == other.snippets

    def __contains__(self, ref: object) -> bool:
        return ref in self._by_ref

    def index_of(self, ref: SnippetRef) -> int:
        try:
            return self._by_ref[tuple(ref)]
        except KeyError:
            raise DanglingReference(f"snippet {ref} not in store") from None

    def get(self, ref: SnippetRef) -> KnowledgeSnippet:
        return self.snippets[self.index_of(ref)]

    def to_json(self) -> dict:
        out: dict = {}
        for s in self.snippets:
            ent = out.setdefault(s.domain, {}).setdefault(
                s.entity_id, {"name": s.entity_name or None, "docs": {}}
            )
            ent["docs"][s.doc_id] = {"title": s.title, "body": s.body}
        return out

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=False, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


class Speaker(str, enum.Enum):
    USER = "U"
    SYSTEM = "S"


@dataclass(frozen=True)
class Turn:
    speaker: Speaker
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("turn text must be non-empty")


@dataclass(frozen=True)
class DialogueContext:
    turns: tuple[Turn, ...]

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        if not self.turns:
            raise ValueError("dialogue context needs at least one turn")
        if self.turns[-1].speaker is not Speaker.USER:
            raise ValueError("dialogue context must end with a user turn")

    @classmethod
    def of(cls, *pairs: tuple[str, str]) -> "DialogueContext":
        """Shorthand: ``DialogueContext.of(("U", "hi"), ("S", "hello"), ("U", "bye"))``."""
        return cls(tuple(Turn(Speaker(sp), text) for sp, text in pairs))


@dataclass(frozen=True)
class TurnLabel:
    target: bool
    gold: Optional[SnippetRef] = None
    response: Optional[str] = None

    def __post_init__(self):
        has_payload = self.gold is not None and self.response is not None
        if self.target != has_payload:
            raise ValueError("target must be true exactly when gold and response are present")
        if self.gold is not None:
            object.__setattr__(self, "gold", tuple(self.gold))

    def to_json(self) -> dict:
        if not self.target:
            return {"target": False}
        domain, entity_id, doc_id = self.gold
        return {
            "target": True,
            "knowledge": [{"domain": domain, "entity_id": entity_id, "doc_id": doc_id}],
            "response": self.response,
        }


@dataclass
class Corpus:
    contexts: list[DialogueContext]
    labels: list[TurnLabel]
    store_ref: str = ""

    def __post_init__(self):
        if len(self.contexts) != len(self.labels):
            raise LengthMismatch(f"{len(self.contexts)} contexts vs {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.contexts)

    def positives(self) -> list[int]:
        return [i for i, lab in enumerate(self.labels) if lab.target]


def _no_duplicate_keys(pairs):
    obj = {}
    for key, value in pairs:
        if key in obj:
            raise ParseError(f"duplicate JSON key {key!r}")
        obj[key] = value
    return obj


def read_json(path) -> object:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f, object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from e


def knowledge_from_json(data: object) -> KnowledgeStore:
    if not isinstance(data, dict):
        raise ParseError("knowledge root must be an object")
    snippets = []
    try:
        for domain, entities in data.items():
            for entity_id, entity in entities.items():
                entity_id = str(entity_id)
                name = entity.get("name") or ""
                if entity_id == DOMAIN_WIDE_ENTITY:
                    name = ""
                for doc_id, doc in entity["docs"].items():
                    snippets.append(
                        KnowledgeSnippet(
                            domain=domain,
                            entity_id=entity_id,
                            entity_name=name,
                            doc_id=str(doc_id),
                            title=doc["title"],
                            body=doc["body"],
                        )
                    )
    except (KeyError, TypeError, AttributeError) as e:
        raise ParseError(f"malformed knowledge entry: {e!r}") from e
    if not snippets:
        raise EmptyStore("knowledge file has no snippets")
    return KnowledgeStore(snippets)


def load_knowledge(path) -> KnowledgeStore:
    return knowledge_from_json(read_json(path))


def save_knowledge(store: KnowledgeStore, path) -> None:
    write_json(store.to_json(), path)


def contexts_from_json(data: object) -> list[DialogueContext]:
    if not isinstance(data, list):
        raise ParseError("logs root must be a list")
    contexts = []
    try:
        for dialog in data:
            contexts.append(
                DialogueContext(tuple(Turn(Speaker(t["speaker"]), t["text"]) for t in dialog))
            )
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed log entry: {e!r}") from e
    return contexts


def _parse_labels(data: object) -> list[TurnLabel]:
    if not isinstance(data, list):
        raise ParseError("labels root must be a list")
    labels = []
    for i, obj in enumerate(data):
        try:
            target = bool(obj["target"])
            if not target:
                labels.append(TurnLabel(False))
                continue
            knowledge = obj["knowledge"]
            if len(knowledge) != 1:
                raise ParseError(f"label {i}: expected exactly one gold snippet, got {len(knowledge)}")
            k = knowledge[0]
            ref = (k["domain"], str(k["entity_id"]), str(k["doc_id"]))
            labels.append(TurnLabel(True, ref, obj["response"]))
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"label {i}: {e!r}") from e
    return labels


def corpus_from_json(logs: object, labels: object, store: KnowledgeStore) -> Corpus:
    contexts = contexts_from_json(logs)
    parsed = _parse_labels(labels)
    if len(contexts) != len(parsed):
        raise LengthMismatch(f"{len(contexts)} logs vs {len(parsed)} labels")
    for i, lab in enumerate(parsed):
        if lab.target and lab.gold not in store:
            raise DanglingReference(f"label {i} references missing snippet {lab.gold}")
    return Corpus(contexts, parsed, store.fingerprint())


def load_logs(path) -> list[DialogueContext]:
    return contexts_from_json(read_json(path))


def load_corpus(logs_path, labels_path, store: KnowledgeStore) -> Corpus:
    return corpus_from_json(read_json(logs_path), read_json(labels_path), store)


def logs_to_json(contexts: Sequence[DialogueContext]) -> list:
    return [[{"speaker": t.speaker.value, "text": t.text} for t in c.turns] for c in contexts]


def labels_to_json(labels: Sequence[TurnLabel]) -> list:
    return [lab.to_json() for lab in labels]


def write_json(obj, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, ensure_ascii=False, indent=1)
        f.write("\n")


def save_corpus(corpus: Corpus, logs_path, labels_path) -> None:
    write_json(logs_to_json(corpus.contexts), logs_path)
    write_json(labels_to_json(corpus.labels), labels_path)


def save_labels(labels: Sequence[dict], path) -> None:
    """Write raw label objects (used for predictions, which may omit fields)."""
    write_json(list(labels), path)
