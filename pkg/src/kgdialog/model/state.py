"""All trainable parameters plus constructors for the recurrent carries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn.rng import Rng
from ..nn.tensor import Tensor
from .config import ModelConfig
from .decoder import DecoderParams
from .encoder import DialogState, EncoderParams
from .selector import HistoryState, SelectorParams


@dataclass
class ModelState:
    config: ModelConfig
    vocab_size: int
    encoder: EncoderParams
    selector: SelectorParams
    decoder: DecoderParams

    @classmethod
    def create(cls, cfg: ModelConfig, vocab_size: int, seed: int = 0, dtype=np.float32) -> "ModelState":
        rng = Rng(seed)
        return cls(
            config=cfg,
            vocab_size=vocab_size,
            encoder=EncoderParams.create(cfg, vocab_size, rng.child(0), dtype),
            selector=SelectorParams.create(cfg, rng.child(1), dtype),
            decoder=DecoderParams.create(cfg, vocab_size, rng.child(2), dtype),
        )

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = list(self.encoder.named("encoder"))
        out += list(self.selector.named("selector"))
        out += list(self.decoder.named("decoder"))
        return out

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    @property
    def dtype(self):
        return self.encoder.embed.dtype

    def initial_dialog_state(self) -> DialogState:
        return DialogState.initial(self.config.d_model, self.dtype)

    def initial_history_state(self) -> HistoryState:
        return HistoryState.initial(self.config.d_model, self.dtype)
