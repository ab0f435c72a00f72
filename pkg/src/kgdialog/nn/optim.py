"""Adam optimizer with bias correction and global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-07
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def create(cls, named_params, lr: float = 0.001, beta1: float = 0.9,
               beta2: float = 0.999, eps: float = 1e-07) -> "AdamState":
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for name, p in named_params:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state


def adam_step(named_params, state: AdamState) -> None:
    """One bias-corrected update in place; missing grads count as zero."""
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for name, p in named_params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        m = state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        p.data = (p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.data.dtype, copy=False)


def clip_global_norm(named_params, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    total = 0.0
    grads = []
    for _, p in named_params:
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
            grads.append(p)
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for p in grads:
            p.grad = p.grad * scale
    return norm


def zero_grads(named_params) -> None:
    for _, p in named_params:
        p.grad = None
