"""Dialogue-level batching with exact padding masks.

Whole dialogues are grouped per batch (the optimizer steps once per batch);
padded id arrays carry masks so every padded position is identifiable and
the original token ids round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nn.rng import Rng
from .data import Episode
from .vocab import PAD, Vocab


@dataclass
class Batch:
    """Padded id arrays for a group of episodes.

    Shapes: x_ids/y_ids are (B, T, S*), pool_ids is (B, T, L, S*), with
    companion length arrays and boolean masks. gold is -1 on unlabeled or
    padded turns. episodes keeps the source objects for per-episode
    processing.
    """

    episodes: list[Episode]
    x_ids: np.ndarray
    x_mask: np.ndarray
    y_ids: np.ndarray
    y_mask: np.ndarray
    pool_ids: np.ndarray
    pool_token_mask: np.ndarray
    pool_mask: np.ndarray      # (B, T, L): real pool entries
    turn_mask: np.ndarray      # (B, T): real turns
    gold: np.ndarray           # (B, T), -1 when unlabeled
    labeled_mask: np.ndarray   # (B, T)

    @property
    def size(self) -> int:
        return len(self.episodes)

    def unbatch(self) -> list[list[dict]]:
        """Recover per-turn id sequences from the padded arrays."""
        out = []
        for b in range(self.size):
            turns = []
            for t in range(int(self.turn_mask[b].sum())):
                pool = []
                for l in range(int(self.pool_mask[b, t].sum())):
                    pool.append(self.pool_ids[b, t, l][self.pool_token_mask[b, t, l]].tolist())
                turns.append({
                    "x": self.x_ids[b, t][self.x_mask[b, t]].tolist(),
                    "y": self.y_ids[b, t][self.y_mask[b, t]].tolist(),
                    "pool": pool,
                    "gold": int(self.gold[b, t]) if self.labeled_mask[b, t] else None,
                })
            out.append(turns)
        return out


def _pad_block(seqs: list[np.ndarray], width: int) -> tuple[np.ndarray, np.ndarray]:
    ids = np.full((len(seqs), width), PAD, dtype=np.int64)
    mask = np.zeros((len(seqs), width), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = True
    return ids, mask


def encode_episode(ep: Episode, vocab: Vocab) -> list[dict]:
    turns = []
    for t in ep.turns:
        turns.append({
            "x": vocab.encode(t.apprentice),
            "y": vocab.encode(t.wizard),
            "pool": [vocab.encode(s) for s in t.pool.sentences],
            "gold": t.gold,
        })
    return turns


def make_batches(episodes: list[Episode], vocab: Vocab, batch_size: int,
                 seed: int, epoch: int = 0, shuffle: bool = True) -> list[Batch]:
    """Group whole dialogues into batches; shuffling is (seed, epoch) deterministic."""
    order = list(range(len(episodes)))
    if shuffle:
        order = [order[i] for i in Rng(seed).child(epoch).permutation(len(order))]
    batches = []
    for start in range(0, len(order), batch_size):
        group = [episodes[i] for i in order[start:start + batch_size]]
        encoded = [encode_episode(ep, vocab) for ep in group]
        B = len(group)
        T = max(len(turns) for turns in encoded)
        L = max(len(t["pool"]) for turns in encoded for t in turns)
        SX = max((len(t["x"]) for turns in encoded for t in turns), default=1) or 1
        SY = max((len(t["y"]) for turns in encoded for t in turns), default=1) or 1
        SK = max(len(s) for turns in encoded for t in turns for s in t["pool"])

        x_ids = np.full((B, T, SX), PAD, dtype=np.int64)
        x_mask = np.zeros((B, T, SX), dtype=bool)
        y_ids = np.full((B, T, SY), PAD, dtype=np.int64)
        y_mask = np.zeros((B, T, SY), dtype=bool)
        pool_ids = np.full((B, T, L, SK), PAD, dtype=np.int64)
        pool_token_mask = np.zeros((B, T, L, SK), dtype=bool)
        pool_mask = np.zeros((B, T, L), dtype=bool)
        turn_mask = np.zeros((B, T), dtype=bool)
        gold = np.full((B, T), -1, dtype=np.int64)

        for b, turns in enumerate(encoded):
            for t, turn in enumerate(turns):
                turn_mask[b, t] = True
                x_ids[b, t, : len(turn["x"])] = turn["x"]
                x_mask[b, t, : len(turn["x"])] = True
                y_ids[b, t, : len(turn["y"])] = turn["y"]
                y_mask[b, t, : len(turn["y"])] = True
                for l, sent in enumerate(turn["pool"]):
                    pool_ids[b, t, l, : len(sent)] = sent
                    pool_token_mask[b, t, l, : len(sent)] = True
                    pool_mask[b, t, l] = True
                if turn["gold"] is not None:
                    gold[b, t] = turn["gold"]

        batches.append(Batch(
            episodes=group,
            x_ids=x_ids, x_mask=x_mask,
            y_ids=y_ids, y_mask=y_mask,
            pool_ids=pool_ids, pool_token_mask=pool_token_mask,
            pool_mask=pool_mask, turn_mask=turn_mask,
            gold=gold, labeled_mask=gold >= 0,
        ))
    return batches
