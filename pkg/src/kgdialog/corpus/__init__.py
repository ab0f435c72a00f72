from .tokenizer import detokenize, tokenize
from .data import (
    NO_PASSAGES_TAG,
    SENTINEL_TEXT,
    SENTINEL_TOKENS,
    CorpusError,
    Episode,
    KnowledgePool,
    Turn,
    load_episodes,
    save_episodes,
)
from .vocab import BOS, EOS, PAD, UNK, Vocab, build_vocab
from .synth import FILLER_WORDS, SynthConfig, consistency_cue, consistent_sentences, generate_synthetic
from .batching import Batch, encode_episode, make_batches

__all__ = [
    "tokenize", "detokenize",
    "CorpusError", "Episode", "KnowledgePool", "Turn",
    "SENTINEL_TOKENS", "SENTINEL_TEXT", "NO_PASSAGES_TAG",
    "load_episodes", "save_episodes",
    "Vocab", "build_vocab", "PAD", "BOS", "EOS", "UNK",
    "SynthConfig", "generate_synthetic", "consistency_cue", "consistent_sentences", "FILLER_WORDS",
    "Batch", "encode_episode", "make_batches",
]
