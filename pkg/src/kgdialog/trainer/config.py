"""Training hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class TrainConfig:
    lr: float = 0.001
    knowledge_weight: float = 1.0    # weight of the auxiliary selection loss
    tau: float = 0.1                 # Gumbel-Softmax temperature
    eps_selection: float = 0.1       # label smoothing for knowledge selection
    eps_generation: float = 0.05     # label smoothing for response generation
    epochs: int = 5
    batch_size: int = 8
    seed: int = 0
    labeled_fraction: float = 1.0
    clip_norm: float = 1.0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.knowledge_weight < 0:
            raise ValueError("knowledge_weight must be non-negative")
        if not 0.0 <= self.labeled_fraction <= 1.0:
            raise ValueError("labeled_fraction must be in [0, 1]")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        return cls(**obj)
