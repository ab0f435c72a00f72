"""Per-episode training objective and its exact-enumeration oracles.

The objective combines, per turn: teacher-forced reconstruction of the
response given a posterior-sampled knowledge sentence, the KL between the
posterior and the prior, and (on labeled turns) a smoothed cross entropy of
the posterior against the gold selection. The history of posterior samples
conditions both distributions at later turns through the history GRU; the
same single straight-through sample both feeds that recurrence and picks
the decoder's knowledge sentence.

The enumeration functions compute the exact evidence and the exact-
expectation lower bound on tiny instances; they share the model's forward
pieces but do all outer arithmetic in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..corpus.data import Episode
from ..corpus.vocab import EOS, Vocab
from ..model.config import ModelConfig
from ..model.decoder import build_source_memory, sequence_nll
from ..model.encoder import dialog_step, encode_pool, encode_sentence
from ..model.pipeline import utterance_ids
from ..model.selector import (
    history_step,
    posterior_distribution,
    prior_distribution,
    select_knowledge,
)
from ..nn.layers import gru_cell_step
from ..model.state import ModelState
from ..nn.functional import kl_categorical, smoothed_cross_entropy
from ..nn.rng import Rng
from ..nn.tensor import Tensor, no_grad, zeros
from .config import TrainConfig

ENUMERATION_LIMIT = 10_000


@dataclass
class TurnLoss:
    nll: float
    kl: float
    knowledge: float
    labeled: bool
    selected: int


@dataclass
class TurnLossBreakdown:
    per_turn: list[TurnLoss]
    nll: float
    kl: float
    knowledge_loss: float
    total: float
    loss: Tensor  # scalar node; total = nll + kl + weight * knowledge_loss

    @property
    def turns(self) -> int:
        return len(self.per_turn)


def _encode_turn(turn, state: ModelState, vocab: Vocab):
    cfg = state.config
    x_ids = utterance_ids(vocab, turn.apprentice)
    y_ids = utterance_ids(vocab, turn.wizard)
    pool_ids = [utterance_ids(vocab, s) for s in turn.pool.sentences]
    x_enc = encode_sentence(x_ids, state.encoder, cfg)
    y_enc = encode_sentence(y_ids, state.encoder, cfg)
    pool_encs, pooled = encode_pool(pool_ids, state.encoder, cfg)
    return {
        "x_ids": x_ids, "y_ids": y_ids, "pool_ids": pool_ids,
        "x_enc": x_enc, "y_enc": y_enc, "pool_encs": pool_encs, "pooled": pooled,
        "gold": turn.gold,
    }


def _history_input(state: ModelState, prev_selected: Tensor) -> Tensor:
    if state.config.history_ablation:
        return zeros(state.config.d_model, dtype=state.dtype)
    return prev_selected


def episode_loss(
    episode: Episode,
    state: ModelState,
    vocab: Vocab,
    cfg: TrainConfig,
    rng: Rng | None = None,
    selection: str = "st",
    noise_per_turn: list[np.ndarray] | None = None,
) -> TurnLossBreakdown:
    """Average per-turn objective over one episode.

    selection: "st" uses the straight-through sample (hard knowledge forward,
    soft gradients into the history); "soft" uses the fully relaxed embedding
    so the loss is differentiable end to end for gradient checks.
    """
    mcfg = state.config
    mode = {"st": "gumbel", "soft": "gumbel-soft"}[selection]
    dialog = state.initial_dialog_state()
    history = state.initial_history_state()
    prev_selected = zeros(mcfg.d_model, dtype=state.dtype)

    per_turn: list[TurnLoss] = []
    total_terms = []
    for t, turn in enumerate(episode.turns, start=1):
        encs = _encode_turn(turn, state, vocab)
        history = history_step(history, _history_input(state, prev_selected), state.selector)
        prior = prior_distribution(dialog.d_xy, encs["x_enc"].h, history.d_k,
                                   encs["pooled"], None, state.selector, mcfg, t)
        dialog = dialog_step(dialog, encs["x_enc"].h, encs["y_enc"].h, state.encoder)
        posterior = posterior_distribution(dialog.d_xy, history.d_k, encs["pooled"],
                                           None, state.selector, mcfg, t)
        kl_t = kl_categorical(posterior.probs, prior.probs)

        noise = noise_per_turn[t - 1] if noise_per_turn is not None else None
        sel = select_knowledge(posterior, encs["pooled"], mode=mode, tau=cfg.tau,
                               rng=rng, noise=noise)
        memory = build_source_memory(encs["x_enc"], encs["x_ids"],
                                     encs["pool_encs"][sel.index], encs["pool_ids"][sel.index],
                                     state.decoder)
        gold_seq = np.concatenate([encs["y_ids"], [EOS]])
        nll_t = sequence_nll(memory, gold_seq, state.decoder, state.encoder.embed,
                             mcfg, smoothing=cfg.eps_generation).sum()

        labeled = encs["gold"] is not None
        if labeled:
            know_t = smoothed_cross_entropy(posterior.probs, encs["gold"], cfg.eps_selection)
        else:
            know_t = None

        term = nll_t + kl_t
        if know_t is not None:
            term = term + know_t * cfg.knowledge_weight
        total_terms.append(term)
        per_turn.append(TurnLoss(
            nll=float(nll_t.data), kl=float(kl_t.data),
            knowledge=float(know_t.data) if know_t is not None else 0.0,
            labeled=labeled, selected=sel.index,
        ))
        prev_selected = sel.embedding

    T = len(per_turn)
    loss = total_terms[0]
    for term in total_terms[1:]:
        loss = loss + term
    loss = loss * (1.0 / T)
    nll = sum(t.nll for t in per_turn) / T
    kl = sum(t.kl for t in per_turn) / T
    know = sum(t.knowledge for t in per_turn) / T
    return TurnLossBreakdown(
        per_turn=per_turn, nll=nll, kl=kl, knowledge_loss=know,
        total=nll + kl + cfg.knowledge_weight * know, loss=loss,
    )


def _enumeration_tables(episode: Episode, state: ModelState, vocab: Vocab):
    """Per-turn encodings, per-candidate reconstruction log-likelihoods and
    the dialogue-state sequence (which does not depend on selections)."""
    mcfg = state.config
    n_paths = 1
    for turn in episode.turns:
        n_paths *= len(turn.pool)
        if n_paths > ENUMERATION_LIMIT:
            raise ValueError(
                f"enumeration infeasible: pool-size product exceeds {ENUMERATION_LIMIT}"
            )
    turns = []
    dialog = state.initial_dialog_state()
    for turn in episode.turns:
        encs = _encode_turn(turn, state, vocab)
        d_prev = dialog
        dialog = dialog_step(dialog, encs["x_enc"].h, encs["y_enc"].h, state.encoder)
        gold_seq = np.concatenate([encs["y_ids"], [EOS]])
        loglik = []
        for l in range(len(encs["pool_ids"])):
            memory = build_source_memory(encs["x_enc"], encs["x_ids"],
                                         encs["pool_encs"][l], encs["pool_ids"][l],
                                         state.decoder)
            losses = sequence_nll(memory, gold_seq, state.decoder, state.encoder.embed,
                                  mcfg, smoothing=0.0)
            loglik.append(-float(losses.data.astype(np.float64).sum()))
        turns.append({
            "encs": encs, "d_prev": d_prev, "d_cur": dialog,
            "loglik": np.array(loglik, dtype=np.float64),
        })
    return turns


def enumerate_marginal(episode: Episode, state: ModelState, vocab: Vocab) -> float:
    """Exact log p(responses | contexts): sums the decoder likelihood over
    every knowledge sequence, weighted by the prior chain."""
    with no_grad():
        turns = _enumeration_tables(episode, state, vocab)
        sel = state.selector
        mcfg = state.config
        T = len(turns)

        def rec(t: int, d_k, prev_emb) -> float:
            if t == T:
                return 0.0
            info = turns[t]
            # advance the history GRU exactly as the training loop does
            d_k_t = _gru_hist_step(d_k, _history_input(state, prev_emb), sel)
            prior = prior_distribution(info["d_prev"].d_xy, info["encs"]["x_enc"].h,
                                       d_k_t, info["encs"]["pooled"], None, sel, mcfg, t + 1)
            logpi = np.log(prior.probs.data.astype(np.float64))
            vals = []
            for l in range(len(logpi)):
                emb = info["encs"]["pool_encs"][l].h
                vals.append(logpi[l] + info["loglik"][l] + rec(t + 1, d_k_t, emb))
            m = max(vals)
            return m + math.log(sum(math.exp(v - m) for v in vals))

        zero = zeros(mcfg.d_model, dtype=state.dtype)
        return rec(0, state.initial_history_state().d_k, zero)


def elbo_exact(episode: Episode, state: ModelState, vocab: Vocab) -> float:
    """Exact-expectation evidence lower bound (expectations enumerated over
    the full posterior selection tree, no sampling)."""
    with no_grad():
        turns = _enumeration_tables(episode, state, vocab)
        sel = state.selector
        mcfg = state.config
        T = len(turns)

        def rec(t: int, d_k, prev_emb) -> float:
            if t == T:
                return 0.0
            info = turns[t]
            d_k_t = _gru_hist_step(d_k, _history_input(state, prev_emb), sel)
            prior = prior_distribution(info["d_prev"].d_xy, info["encs"]["x_enc"].h,
                                       d_k_t, info["encs"]["pooled"], None, sel, mcfg, t + 1)
            posterior = posterior_distribution(info["d_cur"].d_xy, d_k_t,
                                               info["encs"]["pooled"], None, sel, mcfg, t + 1)
            q = posterior.probs.data.astype(np.float64)
            p = prior.probs.data.astype(np.float64)
            kl = float(np.sum(np.where(q > 0, q * (np.log(np.maximum(q, 1e-300)) -
                                                   np.log(np.maximum(p, 1e-300))), 0.0)))
            term = float(np.dot(q, info["loglik"])) - kl
            for l in range(len(q)):
                if q[l] > 0:
                    emb = info["encs"]["pool_encs"][l].h
                    term += q[l] * rec(t + 1, d_k_t, emb)
            return term

        zero = zeros(mcfg.d_model, dtype=state.dtype)
        return rec(0, state.initial_history_state().d_k, zero)


def _gru_hist_step(d_k, emb, sel_params):
    return gru_cell_step(emb, d_k, sel_params.gru_hist)
