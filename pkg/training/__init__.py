"""
Gradient-ascent training of the tracking model
"""

from .optimizer import AdamState, adam_step, clip_by_global_norm
from .trainer import TrainConfig, Trainer, TrainingAborted, TrainResult, split_windows, train

__all__ = [
    "AdamState",
    "adam_step",
    "clip_by_global_norm",
    "TrainConfig",
    "Trainer",
    "TrainingAborted",
    "TrainResult",
    "split_windows",
    "train",
]
