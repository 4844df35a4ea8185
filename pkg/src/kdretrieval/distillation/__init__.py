"""Soft-label distillation: targets, losses, teacher caching and training."""
from .cache import TeacherLogitCache, score_teacher
from .data import Batch, TokenStore
from .losses import (
    LossConfig,
    combined_loss,
    hard_loss,
    soft_loss,
    soft_loss_ce,
    soft_loss_mse,
    temperature_softmax,
)
from .optim import Adam
from .sweep import SweepRow, run_sweep, sweep_grid
from .train import TrainConfig, TrainResult, model_scores, select_fraction, train

__all__ = [
    "Adam", "Batch", "LossConfig", "SweepRow", "TeacherLogitCache", "TokenStore", "TrainConfig", "TrainResult",
    "combined_loss", "hard_loss", "model_scores", "run_sweep", "score_teacher", "select_fraction", "soft_loss",
    "soft_loss_ce", "soft_loss_mse", "sweep_grid", "temperature_softmax", "train",
]
