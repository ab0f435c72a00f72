from .config import TrainConfig
from .loss import (
    TurnLoss,
    TurnLossBreakdown,
    elbo_exact,
    enumerate_marginal,
    episode_loss,
)
from .loop import TrainingDiverged, mask_labels, train, train_epoch
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint

__all__ = [
    "TrainConfig", "TurnLoss", "TurnLossBreakdown",
    "episode_loss", "elbo_exact", "enumerate_marginal",
    "TrainingDiverged", "mask_labels", "train", "train_epoch",
    "CheckpointError", "save_checkpoint", "load_checkpoint",
]
