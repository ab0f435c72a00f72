"""Model architecture configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class ModelConfig:
    d_model: int = 64
    heads: int = 4
    decoder_blocks: int = 2
    ffn_mult: int = 4
    sentence_encoder: str = "bigru"   # "bigru" or "attention"
    encoder_blocks: int = 2           # depth of the attention encoder variant
    max_positions: int = 64
    max_gen_len: int = 40
    scale_knowledge_scores: bool = False  # off: raw dot products between query and pool
    history_ablation: bool = False        # zero the selection-history GRU input
    ppl_knowledge: str = "prior"          # condition perplexity on "prior" or "gold" knowledge

    def __post_init__(self):
        if self.d_model % 2 != 0:
            raise ValueError("d_model must be even (bidirectional sentence encoder)")
        if self.d_model % self.heads != 0:
            raise ValueError("d_model must be divisible by heads")
        if self.sentence_encoder not in ("bigru", "attention"):
            raise ValueError(f"unknown sentence encoder {self.sentence_encoder!r}")
        if self.ppl_knowledge not in ("prior", "gold"):
            raise ValueError("ppl_knowledge must be 'prior' or 'gold'")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)
