"""Sequential latent knowledge selection.

The prior scores the pool from the dialogue state carried through the
previous turn plus the current context; the posterior additionally sees the
current response (folded into the dialogue state). A dedicated GRU carries
the history of selected-sentence embeddings; both queries consume its
output, so selection at turn t conditions on everything selected before t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..nn.functional import gumbel_softmax_sample, softmax_masked, straight_through_weights
from ..nn.layers import GruParams, gru_cell_step, param
from ..nn.rng import Rng
from ..nn.tensor import Tensor, cat, zeros
from .config import ModelConfig


@dataclass
class SelectorParams:
    w_prior: Tensor   # (d, 3d): projects [d_xy_prev; h_x; d_k]
    w_post: Tensor    # (d, 2d): projects [d_xy; d_k]
    gru_hist: GruParams

    @classmethod
    def create(cls, cfg: ModelConfig, rng: Rng, dtype=np.float32) -> "SelectorParams":
        d = cfg.d_model
        return cls(
            w_prior=param((d, 3 * d), rng, dtype),
            w_post=param((d, 2 * d), rng, dtype),
            gru_hist=GruParams.create(d, d, rng, dtype),
        )

    def named(self, prefix: str = "selector"):
        yield f"{prefix}.w_prior", self.w_prior
        yield f"{prefix}.w_post", self.w_post
        yield from self.gru_hist.named(f"{prefix}.gru_hist")


@dataclass
class HistoryState:
    """Selection-history carry: d_k plus the embedding last consumed."""

    d_k: Tensor
    last_selected: Tensor
    turn: int = 0

    @classmethod
    def initial(cls, d_model: int, dtype=np.float32) -> "HistoryState":
        return cls(d_k=zeros(d_model, dtype=dtype), last_selected=zeros(d_model, dtype=dtype), turn=0)


@dataclass
class KnowledgeDistribution:
    """Masked categorical over a turn's pool."""

    probs: Tensor
    logits: Tensor
    mask: np.ndarray
    kind: str        # "prior" or "posterior"
    turn: int = 0


@dataclass
class SelectionResult:
    index: int
    embedding: Tensor          # what feeds the history GRU next turn
    soft: Tensor | None = None # relaxed sample behind a straight-through forward


def history_step(state: HistoryState, selected_emb: Tensor, p: SelectorParams) -> HistoryState:
    """Advance d_k by one history-GRU step consuming a selected embedding.

    At turn 1 the caller passes the zero vector (no selection exists yet).
    """
    return HistoryState(
        d_k=gru_cell_step(selected_emb, state.d_k, p.gru_hist),
        last_selected=selected_emb,
        turn=state.turn + 1,
    )


def _score_pool(query: Tensor, pool_embs: Tensor, mask, cfg: ModelConfig,
                kind: str, turn: int) -> KnowledgeDistribution:
    if mask is None:
        mask = np.ones(pool_embs.shape[0], dtype=bool)
    logits = pool_embs @ query
    if cfg.scale_knowledge_scores:
        logits = logits * (1.0 / math.sqrt(pool_embs.shape[1]))
    probs = softmax_masked(logits, mask)
    return KnowledgeDistribution(probs=probs, logits=logits, mask=np.asarray(mask, bool),
                                 kind=kind, turn=turn)


def prior_distribution(d_xy_prev: Tensor, h_x: Tensor, d_k: Tensor, pool_embs: Tensor,
                       mask, p: SelectorParams, cfg: ModelConfig, turn: int = 0) -> KnowledgeDistribution:
    """Attention over the pool from [d_xy_prev; h_x; d_k] (no current response)."""
    query = cat([d_xy_prev, h_x, d_k], axis=0) @ p.w_prior.T
    return _score_pool(query, pool_embs, mask, cfg, "prior", turn)


def posterior_distribution(d_xy: Tensor, d_k: Tensor, pool_embs: Tensor, mask,
                           p: SelectorParams, cfg: ModelConfig, turn: int = 0) -> KnowledgeDistribution:
    """As the prior, but queried from the response-aware dialogue state."""
    query = cat([d_xy, d_k], axis=0) @ p.w_post.T
    return _score_pool(query, pool_embs, mask, cfg, "posterior", turn)


def select_knowledge(dist: KnowledgeDistribution, pool_embs: Tensor, mode: str = "argmax",
                     tau: float | None = None, rng: Rng | None = None,
                     noise: np.ndarray | None = None) -> SelectionResult:
    """Pick one pool sentence.

    argmax: deterministic, ties resolve to the lowest index; the embedding is
    the plain pool row. gumbel: straight-through sample, the embedding is
    one-hot in the forward pass with gradients flowing through the relaxed
    weights. gumbel-soft: fully relaxed embedding (used by gradient checks).
    """
    if mode == "argmax":
        index = int(np.argmax(dist.probs.data))
        return SelectionResult(index=index, embedding=pool_embs[index])
    if mode in ("gumbel", "gumbel-soft"):
        if tau is None:
            raise ValueError("gumbel selection needs a temperature")
        soft, index = gumbel_softmax_sample(dist.logits, dist.mask, tau, rng=rng, noise=noise)
        if mode == "gumbel":
            weights = straight_through_weights(soft, index)
        else:
            weights = soft
        return SelectionResult(index=index, embedding=weights @ pool_embs, soft=soft)
    raise ValueError(f"unknown selection mode {mode!r}")
