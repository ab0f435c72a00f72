"""Dialogue data model and JSONL ingestion.

One JSONL line per episode:
    {"topic": str, "split": str,
     "turns": [{"x": str, "y": str, "pool": [str], "gold": int|null, "refs": [str]}]}

Pools are listed without the "no passages used" sentinel; the loader inserts
it at index 0 and shifts gold indices up by one. A gold of
"no_passages_used" maps to the sentinel index 0. All text is UTF-8.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .tokenizer import detokenize, tokenize

SENTINEL_TOKENS = ("no", "passages", "used")
SENTINEL_TEXT = "no passages used"
NO_PASSAGES_TAG = "no_passages_used"

SPLITS = ("train", "valid", "test-seen", "test-unseen", "test")
FORMATS = ("wow-jsonl", "holle-jsonl")


class CorpusError(ValueError):
    pass


@dataclass
class KnowledgePool:
    """Candidate sentences for one turn; index 0 is always the sentinel."""

    sentences: list[tuple[str, ...]]
    source_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.sentences:
            raise CorpusError("pool must contain at least the sentinel")
        if tuple(self.sentences[0]) != SENTINEL_TOKENS:
            raise CorpusError("pool index 0 must be the sentinel entry")
        self.sentences = [tuple(s) for s in self.sentences]
        if not self.source_ids:
            self.source_ids = [f"s{i}" for i in range(len(self.sentences))]

    def __len__(self) -> int:
        return len(self.sentences)

    @classmethod
    def from_texts(cls, texts: list[str]) -> "KnowledgePool":
        sentences = [SENTINEL_TOKENS] + [tuple(tokenize(t)) for t in texts]
        return cls(sentences=sentences)


@dataclass
class Turn:
    """One apprentice/wizard exchange with its candidate pool."""

    apprentice: tuple[str, ...]
    wizard: tuple[str, ...]
    pool: KnowledgePool
    gold: int | None = None
    alt_golds: tuple[int, ...] = ()
    references: list[tuple[str, ...]] = field(default_factory=list)

    def __post_init__(self):
        self.apprentice = tuple(self.apprentice)
        self.wizard = tuple(self.wizard)
        if not self.references:
            self.references = [self.wizard]
        self.references = [tuple(r) for r in self.references]
        if tuple(self.references[0]) != self.wizard:
            raise CorpusError("first reference must equal the wizard utterance")
        for g in (self.gold, *self.alt_golds):
            if g is not None and not 0 <= g < len(self.pool):
                raise CorpusError(f"gold index {g} out of range for pool of {len(self.pool)}")

    @property
    def labeled(self) -> bool:
        return self.gold is not None

    def gold_set(self) -> set[int]:
        if self.gold is None:
            return set()
        return {self.gold, *self.alt_golds}


@dataclass
class Episode:
    topic: str
    turns: list[Turn]
    split: str = "train"

    def __post_init__(self):
        if not self.turns:
            raise CorpusError("episode must have at least one turn")
        if self.split not in SPLITS:
            raise CorpusError(f"unknown split tag {self.split!r}")


def _parse_gold(raw, pool_len: int, where: str) -> int | None:
    if raw is None:
        return None
    if raw == NO_PASSAGES_TAG:
        return 0
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise CorpusError(f"{where}: gold must be an int, null or {NO_PASSAGES_TAG!r}")
    if not 0 <= raw < pool_len:
        raise CorpusError(f"{where}: gold index {raw} out of range for pool of {pool_len}")
    return raw + 1  # shift past the inserted sentinel


def _parse_turn(raw: dict, where: str) -> Turn:
    for key in ("x", "y", "pool"):
        if key not in raw:
            raise CorpusError(f"{where}: missing field {key!r}")
    pool_texts = raw["pool"]
    if not isinstance(pool_texts, list) or not all(isinstance(s, str) for s in pool_texts):
        raise CorpusError(f"{where}: pool must be a list of strings")
    pool = KnowledgePool.from_texts(pool_texts)
    raw_gold = raw.get("gold")
    if isinstance(raw_gold, list):
        if not raw_gold:
            raise CorpusError(f"{where}: gold list must not be empty")
        golds = [_parse_gold(g, len(pool_texts), where) for g in raw_gold]
        gold, alt = golds[0], tuple(golds[1:])
    else:
        gold, alt = _parse_gold(raw_gold, len(pool_texts), where), ()
    refs = raw.get("refs") or [raw["y"]]
    wizard = tuple(tokenize(raw["y"]))
    references = [tuple(tokenize(r)) for r in refs]
    if not references or references[0] != wizard:
        references = [wizard] + [r for r in references if r != wizard]
    return Turn(
        apprentice=tuple(tokenize(raw["x"])),
        wizard=wizard,
        pool=pool,
        gold=gold,
        alt_golds=alt,
        references=references,
    )


def load_episodes(path: str | Path, format: str = "wow-jsonl") -> list[Episode]:
    """Parse a JSONL corpus file into validated episodes.

    Malformed records raise CorpusError naming the offending line and field.
    """
    if format not in FORMATS:
        raise CorpusError(f"unknown corpus format {format!r}")
    path = Path(path)
    episodes = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"parse failure at line {lineno}: {exc.msg}") from exc
            where = f"line {lineno}"
            if not isinstance(raw, dict) or "turns" not in raw:
                raise CorpusError(f"{where}: missing field 'turns'")
            turns = [
                _parse_turn(t, f"{where} turn {i + 1}")
                for i, t in enumerate(raw["turns"])
            ]
            try:
                episodes.append(
                    Episode(topic=raw.get("topic", ""), turns=turns, split=raw.get("split", "train"))
                )
            except CorpusError as exc:
                raise CorpusError(f"{where}: {exc}") from exc
    return episodes


def save_episodes(episodes: list[Episode], path: str | Path) -> None:
    """Write episodes back to the JSONL interchange form (sentinel stripped)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for ep in episodes:
            turns = []
            for t in ep.turns:
                if t.gold is None:
                    gold = None
                elif t.gold == 0:
                    gold = NO_PASSAGES_TAG
                else:
                    gold = t.gold - 1
                if t.alt_golds:
                    gold = [gold] + [NO_PASSAGES_TAG if g == 0 else g - 1 for g in t.alt_golds]
                turns.append({
                    "x": detokenize(list(t.apprentice)),
                    "y": detokenize(list(t.wizard)),
                    "pool": [detokenize(list(s)) for s in t.pool.sentences[1:]],
                    "gold": gold,
                    "refs": [detokenize(list(r)) for r in t.references],
                })
            fh.write(json.dumps({"topic": ep.topic, "split": ep.split, "turns": turns}) + "\n")
