from .metrics import ARTICLES, bigram_f1, is_punctuation, normalize_text, unigram_f1
from .evaluate import EvalReport, evaluate_split, perplexity, selection_accuracy

__all__ = [
    "normalize_text", "is_punctuation", "ARTICLES",
    "unigram_f1", "bigram_f1",
    "EvalReport", "perplexity", "selection_accuracy", "evaluate_split",
]
