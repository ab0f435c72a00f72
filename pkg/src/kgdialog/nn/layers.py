"""Layer primitives: initialization, GRU cell, multi-head attention, layer norm."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .functional import masked_softmax
from .rng import Rng
from .tensor import Tensor


def xavier_uniform(shape, rng: Rng, dtype=np.float32, gain: float = 1.0) -> np.ndarray:
    if len(shape) < 2:
        raise ValueError("xavier init expects a matrix shape")
    fan_out, fan_in = shape[0], shape[-1]
    limit = gain * math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(shape, -limit, limit, dtype=dtype)


def param(shape, rng: Rng, dtype=np.float32) -> Tensor:
    return Tensor(xavier_uniform(shape, rng, dtype), requires_grad=True)


def zeros_param(shape, dtype=np.float32) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """x @ w.T (+ b); w has shape (out, in)."""
    out = x @ w.T
    if b is not None:
        out = out + b
    return out


@dataclass
class GruParams:
    """Gate weights for a single GRU cell.

    Update rule: h' = (1 - z) * n + z * h with z the update gate,
    r the reset gate and n = tanh(Wn x + Un (r * h) + bn). With all-zero
    weights this halves the carried state each step.
    """

    input_dim: int
    hidden_dim: int
    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_n: Tensor
    u_n: Tensor
    b_n: Tensor

    @classmethod
    def create(cls, input_dim: int, hidden_dim: int, rng: Rng, dtype=np.float32) -> "GruParams":
        def w():
            return param((hidden_dim, input_dim), rng, dtype)

        def u():
            return param((hidden_dim, hidden_dim), rng, dtype)

        return cls(
            input_dim=input_dim,
            hidden_dim=hidden_dim,
            w_z=w(), u_z=u(), b_z=zeros_param(hidden_dim, dtype),
            w_r=w(), u_r=u(), b_r=zeros_param(hidden_dim, dtype),
            w_n=w(), u_n=u(), b_n=zeros_param(hidden_dim, dtype),
        )

    def named(self, prefix: str):
        for field in ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_n", "u_n", "b_n"):
            yield f"{prefix}.{field}", getattr(self, field)


def gru_cell_step(x: Tensor, h: Tensor, p: GruParams) -> Tensor:
    """One gated update; x is (..., input_dim), h is (..., hidden_dim)."""
    if x.shape[-1] != p.input_dim:
        raise ValueError(f"input dim {x.shape[-1]} != {p.input_dim}")
    if h.shape[-1] != p.hidden_dim:
        raise ValueError(f"hidden dim {h.shape[-1]} != {p.hidden_dim}")
    z = (linear(x, p.w_z, p.b_z) + linear(h, p.u_z)).sigmoid()
    r = (linear(x, p.w_r, p.b_r) + linear(h, p.u_r)).sigmoid()
    n = (linear(x, p.w_n, p.b_n) + linear(r * h, p.u_n)).tanh()
    return (1.0 - z) * n + z * h


@dataclass
class MhaParams:
    d_model: int
    heads: int
    w_q: Tensor
    b_q: Tensor
    w_k: Tensor
    b_k: Tensor
    w_v: Tensor
    b_v: Tensor
    w_o: Tensor
    b_o: Tensor

    @classmethod
    def create(cls, d_model: int, heads: int, rng: Rng, dtype=np.float32) -> "MhaParams":
        if d_model % heads != 0:
            raise ValueError("d_model must be divisible by the head count")
        return cls(
            d_model=d_model,
            heads=heads,
            w_q=param((d_model, d_model), rng, dtype), b_q=zeros_param(d_model, dtype),
            w_k=param((d_model, d_model), rng, dtype), b_k=zeros_param(d_model, dtype),
            w_v=param((d_model, d_model), rng, dtype), b_v=zeros_param(d_model, dtype),
            w_o=param((d_model, d_model), rng, dtype), b_o=zeros_param(d_model, dtype),
        )

    def named(self, prefix: str):
        for field in ("w_q", "b_q", "w_k", "b_k", "w_v", "b_v", "w_o", "b_o"):
            yield f"{prefix}.{field}", getattr(self, field)


def multi_head_attention(queries: Tensor, keys_values: Tensor, mask, p: MhaParams) -> Tensor:
    """Scaled dot-product attention; mask is (n, m) boolean or None.

    Per-row attention weights sum to 1 over unmasked key positions; a row
    with no unmasked key is an error.
    """
    n, d = queries.shape
    m = keys_values.shape[0]
    if d != p.d_model or keys_values.shape[1] != p.d_model:
        raise ValueError("dimension mismatch with attention parameters")
    if mask is None:
        mask = np.ones((n, m), dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (n, m):
            raise ValueError(f"mask shape {mask.shape} != {(n, m)}")
    if not mask.any(axis=1).all():
        raise ValueError("attention row with zero unmasked keys")
    h, dh = p.heads, p.d_model // p.heads
    q = linear(queries, p.w_q, p.b_q).reshape(n, h, dh).transpose(1, 0, 2)
    k = linear(keys_values, p.w_k, p.b_k).reshape(m, h, dh).transpose(1, 0, 2)
    v = linear(keys_values, p.w_v, p.b_v).reshape(m, h, dh).transpose(1, 0, 2)
    scores = (q @ k.transpose(0, 2, 1)) * (1.0 / math.sqrt(dh))
    attn = masked_softmax(scores, np.broadcast_to(mask, (h, n, m)))
    out = (attn @ v).transpose(1, 0, 2).reshape(n, d)
    return linear(out, p.w_o, p.b_o)


@dataclass
class LayerNormParams:
    gain: Tensor
    bias: Tensor

    @classmethod
    def create(cls, dim: int, dtype=np.float32) -> "LayerNormParams":
        return cls(
            gain=Tensor(np.ones(dim, dtype=dtype), requires_grad=True),
            bias=zeros_param(dim, dtype),
        )

    def named(self, prefix: str):
        yield f"{prefix}.gain", self.gain
        yield f"{prefix}.bias", self.bias


def layer_norm(x: Tensor, p: LayerNormParams, eps: float = 1e-5) -> Tensor:
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / (var + eps).sqrt() * p.gain + p.bias
