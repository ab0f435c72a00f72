"""Test-time pipeline: prior-argmax selection and greedy generation.

Shared by the evaluator (which advances the dialogue with gold responses)
and the chat service (which advances with the generated response). Runs
without gradient recording.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..corpus.vocab import EOS, Vocab
from ..nn.tensor import no_grad, zeros
from .decoder import build_source_memory, generate, sequence_nll
from .encoder import dialog_step, encode_pool, encode_sentence
from .selector import history_step, prior_distribution, select_knowledge
from .state import ModelState


def utterance_ids(vocab: Vocab, tokens) -> np.ndarray:
    """Token ids for the model; an empty utterance becomes a lone EOS marker."""
    ids = vocab.encode(tokens)
    if len(ids) == 0:
        ids = np.array([EOS], dtype=np.int64)
    return ids


@dataclass
class DialogCarry:
    """Recurrent state of one ongoing dialogue."""

    dialog: "object"
    history: "object"
    prev_selected: "object"
    turn: int = 0


@dataclass
class TurnResult:
    turn: int
    prior: np.ndarray           # (L,) prior probabilities over the pool
    selected_index: int
    response_ids: list[int] = field(default_factory=list)
    truncated: bool = False
    token_nll: list[float] = field(default_factory=list)


class InferenceEngine:
    """Stateless over parameters; per-dialogue state lives in DialogCarry."""

    def __init__(self, state: ModelState, vocab: Vocab):
        self.state = state
        self.vocab = vocab

    def new_dialog(self) -> DialogCarry:
        d = self.state.config.d_model
        return DialogCarry(
            dialog=self.state.initial_dialog_state(),
            history=self.state.initial_history_state(),
            prev_selected=zeros(d, dtype=self.state.dtype),
            turn=0,
        )

    def step(
        self,
        carry: DialogCarry,
        x_tokens,
        pool_token_lists,
        gold_y_tokens=None,
        generate_response: bool = True,
        nll_gold_y: bool = False,
        knowledge_override: int | None = None,
        max_len: int | None = None,
    ) -> tuple[TurnResult, DialogCarry]:
        """Advance one turn with prior-argmax selection.

        gold_y_tokens, when given, is used both for teacher-forced nll
        (nll_gold_y) and to advance the dialogue state; otherwise the
        generated response advances it. knowledge_override forces the
        decoder's knowledge sentence (the prior is still reported).
        """
        cfg = self.state.config
        enc, sel = self.state.encoder, self.state.selector
        with no_grad():
            x_ids = utterance_ids(self.vocab, x_tokens)
            x_enc = encode_sentence(x_ids, enc, cfg)
            pool_ids = [utterance_ids(self.vocab, s) for s in pool_token_lists]
            pool_encs, pooled = encode_pool(pool_ids, enc, cfg)

            hist_input = carry.prev_selected
            if cfg.history_ablation:
                hist_input = zeros(cfg.d_model, dtype=self.state.dtype)
            history = history_step(carry.history, hist_input, sel)

            mask = np.ones(len(pool_ids), dtype=bool)
            prior = prior_distribution(carry.dialog.d_xy, x_enc.h, history.d_k,
                                       pooled, mask, sel, cfg, turn=carry.turn + 1)
            selection = select_knowledge(prior, pooled, mode="argmax")
            use_idx = selection.index if knowledge_override is None else int(knowledge_override)

            memory = build_source_memory(x_enc, x_ids, pool_encs[use_idx],
                                         pool_ids[use_idx], self.state.decoder)
            result = TurnResult(
                turn=carry.turn + 1,
                prior=prior.probs.data.astype(np.float64).copy(),
                selected_index=selection.index,
            )
            if nll_gold_y:
                if gold_y_tokens is None:
                    raise ValueError("nll_gold_y requires gold_y_tokens")
                y_ids = np.concatenate([utterance_ids(self.vocab, gold_y_tokens), [EOS]])
                losses = sequence_nll(memory, y_ids, self.state.decoder, enc.embed, cfg, smoothing=0.0)
                result.token_nll = [float(v) for v in losses.data]
            if generate_response:
                out_ids, truncated = generate(memory, self.state.decoder, enc.embed, cfg, max_len)
                result.response_ids = out_ids
                result.truncated = truncated

            if gold_y_tokens is not None:
                y_adv = utterance_ids(self.vocab, gold_y_tokens)
            else:
                y_adv = np.array(result.response_ids, dtype=np.int64)
                if len(y_adv) == 0:
                    y_adv = np.array([EOS], dtype=np.int64)
            y_enc = encode_sentence(y_adv, enc, cfg)
            dialog = dialog_step(carry.dialog, x_enc.h, y_enc.h, enc)
            new_carry = DialogCarry(
                dialog=dialog,
                history=history,
                prev_selected=pool_encs[selection.index].h,
                turn=carry.turn + 1,
            )
        return result, new_carry

    def response_text(self, result: TurnResult) -> str:
        return " ".join(self.vocab.decode(result.response_ids))
