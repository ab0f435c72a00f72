"""Sentence encoding with mean pooling, plus the dialogue-level recurrence.

The default sentence encoder is a single bidirectional GRU; a small
self-attention stack is available as a config switch. Pooling averages only
real token positions, using explicit lengths rather than sentinel values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus.vocab import PAD
from ..nn.layers import (
    GruParams,
    LayerNormParams,
    MhaParams,
    gru_cell_step,
    layer_norm,
    linear,
    multi_head_attention,
    param,
    zeros_param,
)
from ..nn.rng import Rng
from ..nn.tensor import Tensor, cat, stack, zeros
from .config import ModelConfig


@dataclass
class SelfAttnBlock:
    attn: MhaParams
    ln1: LayerNormParams
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    ln2: LayerNormParams

    @classmethod
    def create(cls, cfg: ModelConfig, rng: Rng, dtype=np.float32) -> "SelfAttnBlock":
        d, f = cfg.d_model, cfg.d_model * cfg.ffn_mult
        return cls(
            attn=MhaParams.create(d, cfg.heads, rng, dtype),
            ln1=LayerNormParams.create(d, dtype),
            w1=param((f, d), rng, dtype), b1=zeros_param(f, dtype),
            w2=param((d, f), rng, dtype), b2=zeros_param(d, dtype),
            ln2=LayerNormParams.create(d, dtype),
        )

    def named(self, prefix: str):
        yield from self.attn.named(f"{prefix}.attn")
        yield from self.ln1.named(f"{prefix}.ln1")
        yield f"{prefix}.w1", self.w1
        yield f"{prefix}.b1", self.b1
        yield f"{prefix}.w2", self.w2
        yield f"{prefix}.b2", self.b2
        yield from self.ln2.named(f"{prefix}.ln2")


def self_attn_block_apply(x: Tensor, block: SelfAttnBlock) -> Tensor:
    a = layer_norm(x, block.ln1)
    x = x + multi_head_attention(a, a, None, block.attn)
    f = layer_norm(x, block.ln2)
    return x + linear(linear(f, block.w1, block.b1).relu(), block.w2, block.b2)


@dataclass
class EncoderParams:
    embed: Tensor                 # (V, d_model)
    gru_fw: GruParams | None
    gru_bw: GruParams | None
    attn_blocks: list[SelfAttnBlock] | None
    pos: Tensor | None            # positions for the attention variant
    gru_dialog: GruParams         # input 2*d_model, hidden d_model

    @classmethod
    def create(cls, cfg: ModelConfig, vocab_size: int, rng: Rng, dtype=np.float32) -> "EncoderParams":
        d = cfg.d_model
        embed = param((vocab_size, d), rng, dtype)
        if cfg.sentence_encoder == "bigru":
            gru_fw = GruParams.create(d, d // 2, rng, dtype)
            gru_bw = GruParams.create(d, d // 2, rng, dtype)
            attn_blocks, pos = None, None
        else:
            gru_fw = gru_bw = None
            attn_blocks = [SelfAttnBlock.create(cfg, rng, dtype) for _ in range(cfg.encoder_blocks)]
            pos = param((cfg.max_positions, d), rng, dtype)
        return cls(
            embed=embed, gru_fw=gru_fw, gru_bw=gru_bw,
            attn_blocks=attn_blocks, pos=pos,
            gru_dialog=GruParams.create(2 * d, d, rng, dtype),
        )

    def named(self, prefix: str = "encoder"):
        yield f"{prefix}.embed", self.embed
        if self.gru_fw is not None:
            yield from self.gru_fw.named(f"{prefix}.gru_fw")
            yield from self.gru_bw.named(f"{prefix}.gru_bw")
        if self.attn_blocks is not None:
            yield f"{prefix}.pos", self.pos
            for i, block in enumerate(self.attn_blocks):
                yield from block.named(f"{prefix}.block{i}")
        yield from self.gru_dialog.named(f"{prefix}.gru_dialog")


@dataclass
class SentenceEncoding:
    """Per-token states H (len x d) and their arithmetic mean h."""

    H: Tensor
    h: Tensor

    @property
    def length(self) -> int:
        return self.H.shape[0]


@dataclass
class DialogState:
    d_xy: Tensor
    turn: int = 0

    @classmethod
    def initial(cls, d_model: int, dtype=np.float32) -> "DialogState":
        return cls(d_xy=zeros(d_model, dtype=dtype), turn=0)


def _real_length(ids: np.ndarray) -> int:
    mask = ids != PAD
    n = int(mask.sum())
    if n == 0:
        raise ValueError("cannot encode an all-PAD token sequence")
    if not mask[:n].all():
        raise ValueError("PAD is only supported as a suffix")
    return n


def encode_sentences(ids_list: list[np.ndarray], p: EncoderParams, cfg: ModelConfig) -> list[SentenceEncoding]:
    """Encode several sentences in one batched pass (bigru) or a loop."""
    if cfg.sentence_encoder != "bigru":
        return [encode_sentence(ids, p, cfg) for ids in ids_list]
    lengths = [_real_length(np.asarray(ids)) for ids in ids_list]
    B = len(ids_list)
    S = max(lengths)
    dtype = p.embed.dtype
    ids = np.full((B, S), PAD, dtype=np.int64)
    rev = np.full((B, S), PAD, dtype=np.int64)
    for b, seq in enumerate(ids_list):
        n = lengths[b]
        ids[b, :n] = np.asarray(seq)[:n]
        rev[b, :n] = ids[b, :n][::-1]
    mask = np.arange(S)[None, :] < np.asarray(lengths)[:, None]

    def run(direction_ids: np.ndarray, gru: GruParams) -> Tensor:
        embs = p.embed.take_rows(direction_ids.reshape(-1)).reshape(B, S, cfg.d_model)
        h = zeros((B, cfg.d_model // 2), dtype=dtype)
        states = []
        for t in range(S):
            x_t = embs[:, t, :]
            h_new = gru_cell_step(x_t, h, gru)
            m = Tensor(mask[:, t].astype(dtype).reshape(B, 1))
            h = h_new * m + h * (1.0 - m)
            states.append(h)
        return stack(states, axis=1)  # (B, S, d/2)

    fw = run(ids, p.gru_fw)
    bw = run(rev, p.gru_bw)
    out = []
    for b in range(B):
        n = lengths[b]
        Hf = fw[b, :n]
        Hb = bw[b, np.arange(n - 1, -1, -1)]
        H = cat([Hf, Hb], axis=1)
        out.append(SentenceEncoding(H=H, h=H.mean(axis=0)))
    return out


def encode_sentence(ids: np.ndarray, p: EncoderParams, cfg: ModelConfig) -> SentenceEncoding:
    """Encode one sentence; PAD rows carry no influence on H or the pooled h."""
    ids = np.asarray(ids)
    n = _real_length(ids)
    if cfg.sentence_encoder == "bigru":
        return encode_sentences([ids[:n]], p, cfg)[0]
    if n > cfg.max_positions:
        raise ValueError(f"sentence of {n} tokens exceeds max_positions={cfg.max_positions}")
    x = p.embed.take_rows(ids[:n]) + p.pos[:n]
    for block in p.attn_blocks:
        x = self_attn_block_apply(x, block)
    return SentenceEncoding(H=x, h=x.mean(axis=0))


def encode_pool(pool_ids: list[np.ndarray], p: EncoderParams, cfg: ModelConfig):
    """Encode every pool sentence (sentinel included, order preserved).

    Returns the per-sentence encodings plus the (L, d) matrix of pooled
    embeddings used by the knowledge selector.
    """
    if not pool_ids:
        raise ValueError("empty knowledge pool")
    encs = encode_sentences(pool_ids, p, cfg)
    pooled = stack([e.h for e in encs], axis=0)
    return encs, pooled


def dialog_step(state: DialogState, h_x: Tensor, h_y: Tensor, p: EncoderParams) -> DialogState:
    """Advance the dialogue recurrence with the joint utterance-pair embedding."""
    pair = cat([h_x, h_y], axis=0)
    if pair.shape[0] != p.gru_dialog.input_dim:
        raise ValueError("utterance embedding dims do not match the dialogue GRU")
    return DialogState(d_xy=gru_cell_step(pair, state.d_xy, p.gru_dialog), turn=state.turn + 1)
