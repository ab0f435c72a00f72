"""Frequency-ranked vocabulary with fixed special ids."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")


@dataclass
class Vocab:
    id_to_token: list[str]
    token_to_id: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if list(self.id_to_token[:4]) != list(SPECIALS):
            raise ValueError("vocabulary must start with the special tokens")
        if not self.token_to_id:
            self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def encode(self, tokens) -> np.ndarray:
        return np.array([self.token_to_id.get(t, UNK) for t in tokens], dtype=np.int64)

    def decode(self, ids, strip_special: bool = True) -> list[str]:
        out = []
        for i in ids:
            i = int(i)
            if strip_special and i in (PAD, BOS, EOS):
                continue
            out.append(self.id_to_token[i])
        return out

    def to_json(self) -> dict:
        return {"tokens": self.id_to_token}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocab":
        return cls(id_to_token=list(obj["tokens"]))


def iter_corpus_tokens(episodes):
    for ep in episodes:
        for turn in ep.turns:
            yield from turn.apprentice
            yield from turn.wizard
            for ref in turn.references[1:]:  # references[0] mirrors the wizard utterance
                yield from ref
            for sent in turn.pool.sentences:
                yield from sent


def build_vocab(episodes, max_size: int = 10_000, min_freq: int = 1) -> Vocab:
    """Rank tokens by frequency (desc), ties broken lexicographically."""
    if max_size < len(SPECIALS) + 1:
        raise ValueError(f"max_size must be at least {len(SPECIALS) + 1}")
    counts = Counter(iter_corpus_tokens(episodes))
    if not counts:
        raise ValueError("empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [tok for tok, c in ranked if c >= min_freq][: max_size - len(SPECIALS)]
    return Vocab(id_to_token=list(SPECIALS) + kept)
