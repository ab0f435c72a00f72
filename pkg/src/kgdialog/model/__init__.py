from .config import ModelConfig
from .encoder import (
    DialogState,
    EncoderParams,
    SentenceEncoding,
    dialog_step,
    encode_pool,
    encode_sentence,
    encode_sentences,
)
from .selector import (
    HistoryState,
    KnowledgeDistribution,
    SelectionResult,
    SelectorParams,
    history_step,
    posterior_distribution,
    prior_distribution,
    select_knowledge,
)
from .decoder import (
    DecodeStepOutput,
    DecoderParams,
    SourceMemory,
    build_source_memory,
    decode_step,
    generate,
    scatter_copy,
    sequence_nll,
)
from .state import ModelState
from .pipeline import DialogCarry, InferenceEngine, TurnResult, utterance_ids

__all__ = [
    "ModelConfig", "ModelState",
    "EncoderParams", "SentenceEncoding", "DialogState",
    "encode_sentence", "encode_sentences", "encode_pool", "dialog_step",
    "SelectorParams", "HistoryState", "KnowledgeDistribution", "SelectionResult",
    "prior_distribution", "posterior_distribution", "history_step", "select_knowledge",
    "DecoderParams", "SourceMemory", "DecodeStepOutput",
    "build_source_memory", "decode_step", "scatter_copy", "sequence_nll", "generate",
    "DialogCarry", "InferenceEngine", "TurnResult", "utterance_ids",
]
