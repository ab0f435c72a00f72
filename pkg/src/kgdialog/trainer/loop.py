"""Optimization loop: dialogue-batched Adam updates with norm clipping."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from ..corpus.batching import make_batches
from ..corpus.data import Episode
from ..corpus.vocab import Vocab
from ..model.config import ModelConfig
from ..model.state import ModelState
from ..nn.optim import AdamState, adam_step, clip_global_norm, zero_grads
from ..nn.rng import Rng
from .config import TrainConfig
from .loss import episode_loss


class TrainingDiverged(RuntimeError):
    pass


def mask_labels(episodes: list[Episode], rho: float, seed: int) -> list[Episode]:
    """Keep exactly floor(rho * labeled-turn-count) gold labels, dropped
    uniformly without replacement; everything else becomes unlabeled."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must be in [0, 1]")
    labeled = [(ei, ti) for ei, ep in enumerate(episodes)
               for ti, turn in enumerate(ep.turns) if turn.labeled]
    keep_count = math.floor(rho * len(labeled))
    order = Rng(seed).permutation(len(labeled))
    keep = {labeled[i] for i in order[:keep_count]}
    out = []
    for ei, ep in enumerate(episodes):
        turns = []
        for ti, turn in enumerate(ep.turns):
            if turn.labeled and (ei, ti) not in keep:
                turn = dataclasses.replace(turn, gold=None, alt_golds=())
            turns.append(turn)
        out.append(dataclasses.replace(ep, turns=turns))
    return out


def train_epoch(
    episodes: list[Episode],
    state: ModelState,
    cfg: TrainConfig,
    vocab: Vocab,
    adam: AdamState,
    epoch: int = 0,
) -> dict:
    """One pass of Adam updates over dialogue batches; deterministic per seed."""
    named = state.named_parameters()
    batches = make_batches(episodes, vocab, cfg.batch_size, cfg.seed, epoch)
    sample_rng = Rng(cfg.seed).child(7000 + epoch)
    sums = {"nll": 0.0, "kl": 0.0, "knowledge_loss": 0.0, "total": 0.0}
    n_episodes = 0
    for batch in batches:
        zero_grads(named)
        scale = 1.0 / len(batch.episodes)
        for ep in batch.episodes:
            bd = episode_loss(ep, state, vocab, cfg, rng=sample_rng)
            if not np.isfinite(bd.total):
                raise TrainingDiverged(
                    f"non-finite loss (nll={bd.nll:.4g}, kl={bd.kl:.4g}, "
                    f"knowledge={bd.knowledge_loss:.4g}) in epoch {epoch}"
                )
            (bd.loss * scale).backward()
            for key in ("nll", "kl", "knowledge_loss", "total"):
                sums[key] += getattr(bd, key)
            n_episodes += 1
        clip_global_norm(named, cfg.clip_norm)
        adam_step(named, adam)
    return {key: val / max(n_episodes, 1) for key, val in sums.items()}


def train(
    episodes: list[Episode],
    model_cfg: ModelConfig,
    cfg: TrainConfig,
    vocab: Vocab,
    log=None,
) -> tuple[ModelState, AdamState, list[dict]]:
    """Full training run: Xavier-initialized model, labeled-fraction masking,
    cfg.epochs passes of Adam."""
    if cfg.labeled_fraction < 1.0:
        episodes = mask_labels(episodes, cfg.labeled_fraction, cfg.seed)
    state = ModelState.create(model_cfg, vocab.size, seed=cfg.seed)
    adam = AdamState.create(state.named_parameters(), lr=cfg.lr)
    history = []
    for epoch in range(cfg.epochs):
        metrics = train_epoch(episodes, state, cfg, vocab, adam, epoch)
        metrics["epoch"] = epoch
        history.append(metrics)
        if log is not None:
            log(f"epoch {epoch}: total={metrics['total']:.4f} nll={metrics['nll']:.4f} "
                f"kl={metrics['kl']:.4f} know={metrics['knowledge_loss']:.4f}")
    return state, adam, history
