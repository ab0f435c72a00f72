"""Transformer decoder with a copy mechanism over the source memory.

The source memory concatenates the context token states and the selected
knowledge sentence's token states (with a segment embedding marking which
is which). Output words mix a vocabulary softmax with a copy distribution
over source positions, gated by a sigmoid over the copy context vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus.vocab import BOS, EOS
from ..nn.functional import masked_softmax
from ..nn.layers import (
    LayerNormParams,
    MhaParams,
    layer_norm,
    linear,
    multi_head_attention,
    param,
    zeros_param,
)
from ..nn.rng import Rng
from ..nn.tensor import Tensor, cat, no_grad, scatter_add
from .config import ModelConfig
from .encoder import SentenceEncoding


@dataclass
class DecoderBlock:
    self_attn: MhaParams
    cross_attn: MhaParams
    ln1: LayerNormParams
    ln2: LayerNormParams
    ln3: LayerNormParams
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @classmethod
    def create(cls, cfg: ModelConfig, rng: Rng, dtype=np.float32) -> "DecoderBlock":
        d, f = cfg.d_model, cfg.d_model * cfg.ffn_mult
        return cls(
            self_attn=MhaParams.create(d, cfg.heads, rng, dtype),
            cross_attn=MhaParams.create(d, cfg.heads, rng, dtype),
            ln1=LayerNormParams.create(d, dtype),
            ln2=LayerNormParams.create(d, dtype),
            ln3=LayerNormParams.create(d, dtype),
            w1=param((f, d), rng, dtype), b1=zeros_param(f, dtype),
            w2=param((d, f), rng, dtype), b2=zeros_param(d, dtype),
        )

    def named(self, prefix: str):
        yield from self.self_attn.named(f"{prefix}.self_attn")
        yield from self.cross_attn.named(f"{prefix}.cross_attn")
        yield from self.ln1.named(f"{prefix}.ln1")
        yield from self.ln2.named(f"{prefix}.ln2")
        yield from self.ln3.named(f"{prefix}.ln3")
        yield f"{prefix}.w1", self.w1
        yield f"{prefix}.b1", self.b1
        yield f"{prefix}.w2", self.w2
        yield f"{prefix}.b2", self.b2


@dataclass
class DecoderParams:
    pos: Tensor                 # (max_positions, d)
    seg: Tensor                 # (2, d): context / knowledge segment marks
    blocks: list[DecoderBlock]
    ln_f: LayerNormParams
    w_out: Tensor               # (V, d)
    w_cq: Tensor                # copy query projection (d, d)
    w_ck: Tensor
    w_cv: Tensor
    w_copy: Tensor              # (d,) gate vector
    b_copy: Tensor              # scalar gate bias, zero-initialized

    @classmethod
    def create(cls, cfg: ModelConfig, vocab_size: int, rng: Rng, dtype=np.float32) -> "DecoderParams":
        d = cfg.d_model
        return cls(
            pos=param((cfg.max_positions, d), rng, dtype),
            seg=param((2, d), rng, dtype),
            blocks=[DecoderBlock.create(cfg, rng, dtype) for _ in range(cfg.decoder_blocks)],
            ln_f=LayerNormParams.create(d, dtype),
            w_out=param((vocab_size, d), rng, dtype),
            w_cq=param((d, d), rng, dtype),
            w_ck=param((d, d), rng, dtype),
            w_cv=param((d, d), rng, dtype),
            w_copy=Tensor(rng.uniform(d, -0.1, 0.1, dtype=dtype), requires_grad=True),
            b_copy=zeros_param((), dtype),
        )

    def named(self, prefix: str = "decoder"):
        yield f"{prefix}.pos", self.pos
        yield f"{prefix}.seg", self.seg
        for i, block in enumerate(self.blocks):
            yield from block.named(f"{prefix}.block{i}")
        yield from self.ln_f.named(f"{prefix}.ln_f")
        yield f"{prefix}.w_out", self.w_out
        yield f"{prefix}.w_cq", self.w_cq
        yield f"{prefix}.w_ck", self.w_ck
        yield f"{prefix}.w_cv", self.w_cv
        yield f"{prefix}.w_copy", self.w_copy
        yield f"{prefix}.b_copy", self.b_copy


@dataclass
class SourceMemory:
    """Concatenated context + selected-knowledge token states."""

    states: Tensor      # (S, d)
    ids: np.ndarray     # (S,) source token ids for the copy scatter
    mask: np.ndarray    # (S,) real positions

    def __post_init__(self):
        if self.states.shape[0] == 0:
            raise ValueError("empty source memory")
        if len(self.ids) != self.states.shape[0]:
            raise ValueError("memory ids do not align with states")


@dataclass
class DecodeStepOutput:
    h: Tensor                   # decoder state for the predicted position
    p_gen: Tensor               # (V,)
    p_copy_positions: Tensor    # (S,)
    alpha: Tensor               # scalar gate in (0, 1)
    p_mixed: Tensor             # (V,)


def build_source_memory(context: SentenceEncoding, context_ids: np.ndarray,
                        knowledge: SentenceEncoding, knowledge_ids: np.ndarray,
                        p: DecoderParams) -> SourceMemory:
    states = cat([context.H + p.seg[0], knowledge.H + p.seg[1]], axis=0)
    ids = np.concatenate([np.asarray(context_ids), np.asarray(knowledge_ids)]).astype(np.int64)
    return SourceMemory(states=states, ids=ids, mask=np.ones(len(ids), dtype=bool))


def _decoder_stack(memory: SourceMemory, prefix_ids: np.ndarray, p: DecoderParams,
                   embed: Tensor, cfg: ModelConfig) -> Tensor:
    n = len(prefix_ids)
    if n > cfg.max_positions:
        raise ValueError(f"prefix of {n} tokens exceeds max_positions={cfg.max_positions}")
    x = embed.take_rows(prefix_ids) + p.pos[:n]
    causal = np.tril(np.ones((n, n), dtype=bool))
    mem_mask = np.broadcast_to(memory.mask, (n, len(memory.ids)))
    for block in p.blocks:
        a = layer_norm(x, block.ln1)
        x = x + multi_head_attention(a, a, causal, block.self_attn)
        c = layer_norm(x, block.ln2)
        x = x + multi_head_attention(c, memory.states, mem_mask, block.cross_attn)
        f = layer_norm(x, block.ln3)
        x = x + linear(linear(f, block.w1, block.b1).relu(), block.w2, block.b2)
    return layer_norm(x, p.ln_f)


def scatter_copy(p_copy_positions: Tensor, source_ids: np.ndarray, vocab_size: int) -> Tensor:
    """Map a distribution over source positions onto the vocabulary."""
    return scatter_add(p_copy_positions, source_ids, vocab_size)


def _output_heads(h_dec: Tensor, memory: SourceMemory, p: DecoderParams, vocab_size: int):
    """Vocabulary softmax, copy distribution, gate and mixture for each row."""
    n = h_dec.shape[0]
    p_gen = masked_softmax(h_dec @ p.w_out.T, None)
    q = h_dec @ p.w_cq.T
    k = memory.states @ p.w_ck.T
    v = memory.states @ p.w_cv.T
    scores = q @ k.T
    p_copy = masked_softmax(scores, np.broadcast_to(memory.mask, (n, len(memory.ids))))
    context = p_copy @ v
    alpha = (context @ p.w_copy + p.b_copy).sigmoid().reshape(n, 1)
    scattered = scatter_copy(p_copy, memory.ids, vocab_size)
    p_mixed = p_gen * (1.0 - alpha) + scattered * alpha
    return p_gen, p_copy, alpha, p_mixed


def decode_step(memory: SourceMemory, prefix_ids, p: DecoderParams, embed: Tensor,
                cfg: ModelConfig) -> DecodeStepOutput:
    """One teacher-forced step: distribution over the token after the prefix."""
    prefix_ids = np.asarray(prefix_ids, dtype=np.int64)
    if len(prefix_ids) == 0 or prefix_ids[0] != BOS:
        raise ValueError("prefix must begin with BOS")
    h_all = _decoder_stack(memory, prefix_ids, p, embed, cfg)
    h_last = h_all[len(prefix_ids) - 1 : len(prefix_ids)]
    p_gen, p_copy, alpha, p_mixed = _output_heads(h_last, memory, p, embed.shape[0])
    return DecodeStepOutput(
        h=h_last[0],
        p_gen=p_gen[0],
        p_copy_positions=p_copy[0],
        alpha=alpha[0, 0],
        p_mixed=p_mixed[0],
    )


def sequence_nll(memory: SourceMemory, gold_ids, p: DecoderParams, embed: Tensor,
                 cfg: ModelConfig, smoothing: float = 0.0) -> Tensor:
    """Teacher-forced per-token losses over the mixture distribution.

    gold_ids must end with EOS; the decoder input is BOS followed by the
    gold prefix. Returns a vector of per-token losses.
    """
    gold_ids = np.asarray(gold_ids, dtype=np.int64)
    if len(gold_ids) == 0 or gold_ids[-1] != EOS:
        raise ValueError("gold sequence must end with EOS")
    prefix = np.concatenate([[BOS], gold_ids[:-1]])
    h_dec = _decoder_stack(memory, prefix, p, embed, cfg)
    vocab_size = embed.shape[0]
    _, _, _, p_mixed = _output_heads(h_dec, memory, p, vocab_size)
    n = len(gold_ids)
    logp = p_mixed.log()
    picked = logp[np.arange(n), gold_ids]
    if smoothing == 0.0:
        return -picked
    off = smoothing / (vocab_size - 1)
    total = logp.sum(axis=1)
    return -(total * off + picked * (1.0 - smoothing - off))


def generate(memory: SourceMemory, p: DecoderParams, embed: Tensor, cfg: ModelConfig,
             max_len: int | None = None) -> tuple[list[int], bool]:
    """Greedy decoding; stops at EOS or max_len (truncation flagged)."""
    if max_len is None:
        max_len = cfg.max_gen_len
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    max_len = min(max_len, cfg.max_positions - 1)
    out: list[int] = []
    prefix = [BOS]
    truncated = False
    with no_grad():
        while True:
            step = decode_step(memory, prefix, p, embed, cfg)
            nxt = int(np.argmax(step.p_mixed.data))
            if nxt == EOS:
                break
            out.append(nxt)
            prefix.append(nxt)
            if len(out) >= max_len:
                truncated = True
                break
    return out, truncated
