"""Text normalization and n-gram overlap metrics.

Normalization removes punctuation tokens (no alphanumeric characters) and
the articles a/an/the; casing is already handled by the tokenizer. F1 takes
the best score over multiple references. Conventions for empty bags: both
empty scores 1.0, one-sided empty scores 0.0.
"""

from __future__ import annotations

from collections import Counter

ARTICLES = frozenset(("a", "an", "the"))


def is_punctuation(token: str) -> bool:
    return not any(ch.isalnum() for ch in token)


def normalize_text(tokens) -> list[str]:
    return [t for t in tokens if t not in ARTICLES and not is_punctuation(t)]


def _bag_f1(pred: Counter, ref: Counter) -> float:
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    common = pred & ref
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(pred.values())
    recall = overlap / sum(ref.values())
    return 2 * precision * recall / (precision + recall)


def _bigrams(tokens: list[str]) -> list[tuple[str, str]]:
    return [(tokens[i], tokens[i + 1]) for i in range(len(tokens) - 1)]


def unigram_f1(pred, refs) -> float:
    """Bag-of-unigrams F1 on normalized tokens, best over references."""
    if not refs:
        raise ValueError("need at least one reference")
    pred_bag = Counter(normalize_text(pred))
    return max(_bag_f1(pred_bag, Counter(normalize_text(r))) for r in refs)


def bigram_f1(pred, refs) -> float:
    """Bag-of-bigrams F1 on normalized tokens, best over references."""
    if not refs:
        raise ValueError("need at least one reference")
    pred_bag = Counter(_bigrams(normalize_text(pred)))
    return max(_bag_f1(pred_bag, Counter(_bigrams(normalize_text(r)))) for r in refs)
