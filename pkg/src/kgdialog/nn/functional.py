"""Stochastic and categorical primitives shared by the model modules."""

from __future__ import annotations

import numpy as np

from .rng import Rng
from .tensor import Tensor

MASK_FILL = -1e9


def _as_mask(mask, shape) -> np.ndarray:
    if mask is None:
        return np.ones(shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != shape:
        raise ValueError(f"mask shape {mask.shape} does not match logits shape {shape}")
    return mask


def masked_softmax(logits: Tensor, mask=None) -> Tensor:
    """Softmax over the last axis; masked-out entries are exactly zero.

    Computed with max subtraction for stability. Raises if any row has no
    unmasked entry.
    """
    mask = _as_mask(mask, logits.shape)
    if not mask.any(axis=-1).all():
        raise ValueError("softmax over a fully masked row")
    bias = np.where(mask, 0.0, MASK_FILL).astype(logits.dtype, copy=False)
    shifted = logits + Tensor(bias)
    shift = shifted.data.max(axis=-1, keepdims=True)
    e = (shifted - Tensor(shift)).exp() * Tensor(mask.astype(logits.dtype))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_masked(logits: Tensor, mask) -> Tensor:
    """Masked categorical over a single pool of scores (1-d convenience)."""
    if logits.ndim != 1:
        raise ValueError("softmax_masked expects a 1-d score vector")
    return masked_softmax(logits, mask)


def kl_categorical(q: Tensor, p: Tensor, mask=None) -> Tensor:
    """KL(q || p) over the unmasked support of two categorical distributions.

    Both inputs are expected normalized over the unmasked entries; p must be
    positive wherever q is positive.
    """
    mask = _as_mask(mask, q.shape)
    if q.shape != p.shape:
        raise ValueError("q and p must have the same shape")
    support = mask & (q.data > 0)
    if np.any(support & (p.data <= 0)):
        raise ValueError("support violation: q > 0 where p = 0")
    nz = support.astype(q.dtype)
    safe_q = q * Tensor(nz) + Tensor(1.0 - nz)
    safe_p = p * Tensor(nz) + Tensor(1.0 - nz)
    terms = q * (safe_q.log() - safe_p.log()) * Tensor(nz)
    return terms.sum()


def smoothed_cross_entropy(probs: Tensor, gold: int, eps: float, mask=None) -> Tensor:
    """Cross entropy against a label-smoothed target.

    The target places 1 - eps on the gold class and spreads eps uniformly
    over the remaining unmasked classes.
    """
    if probs.ndim != 1:
        raise ValueError("smoothed_cross_entropy expects a 1-d distribution")
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must be in [0, 1)")
    mask = _as_mask(mask, probs.shape)
    gold = int(gold)
    if gold < 0 or gold >= probs.shape[0] or not mask[gold]:
        raise ValueError(f"gold index {gold} out of range or masked")
    n_classes = int(mask.sum())
    gold_logp = probs[gold].log()
    if n_classes == 1 or eps == 0.0:
        return -gold_logp
    maskf = mask.astype(probs.dtype)
    safe = probs * Tensor(maskf) + Tensor(1.0 - maskf)
    off = eps / (n_classes - 1)
    total = (safe.log() * Tensor(maskf)).sum()
    return -(total * off + gold_logp * (1.0 - eps - off))


def gumbel_softmax_sample(
    logits: Tensor,
    mask,
    tau: float,
    hard: bool = True,
    rng: Rng | None = None,
    noise: np.ndarray | None = None,
) -> tuple[Tensor, int]:
    """One relaxed categorical sample with its hard argmax index.

    Returns (soft, index): soft sums to 1 over unmasked entries, index is the
    argmax of the perturbed logits (an exact categorical draw). ``hard``
    documents how the caller combines the pair: with a straight-through
    forward the hard index is used and gradients flow through soft.
    ``noise`` overrides the Gumbel perturbation (tests use fixed noise).
    """
    if tau <= 0:
        raise ValueError("temperature must be positive")
    mask = _as_mask(mask, logits.shape)
    if not mask.any():
        raise ValueError("all-masked distribution")
    if noise is None:
        if rng is None:
            raise ValueError("need an rng when noise is not fixed")
        noise = rng.gumbel(logits.shape, dtype=logits.dtype)
    else:
        noise = np.broadcast_to(np.asarray(noise, dtype=logits.dtype), logits.shape)
    perturbed = logits + Tensor(noise)
    fill = np.where(mask, 0.0, MASK_FILL).astype(logits.dtype, copy=False)
    index = int(np.argmax(perturbed.data + fill))
    soft = masked_softmax(perturbed * (1.0 / tau), mask)
    return soft, index


def straight_through_weights(soft: Tensor, index: int) -> Tensor:
    """Selection weights that are one-hot in the forward pass but carry the
    soft sample's gradient."""
    hard = np.zeros(soft.shape, dtype=soft.dtype)
    hard[index] = 1.0
    return soft + Tensor(hard - soft.data)
