"""Optimisation loop, schedule, batching and checkpoints."""

from .batches import compose_batch, epoch_order
from .checkpoint import (
    AblationMismatchWarning,
    CheckpointError,
    TrainState,
    checkpoint_digest,
    load_checkpoint,
    read_header,
    save_checkpoint,
)
from .config import FULL_PRESET, PRESETS, TOY_PRESET, TrainConfig
from .loop import LOG_HEADER, Trainer, TrainingDiverged, build_models, init_state, train
from .optim import clip_by_global_norm, global_norm, lr_at, sgd_step

__all__ = [
    "LOG_HEADER",
    "FULL_PRESET",
    "PRESETS",
    "TOY_PRESET",
    "AblationMismatchWarning",
    "CheckpointError",
    "TrainConfig",
    "TrainState",
    "Trainer",
    "TrainingDiverged",
    "build_models",
    "checkpoint_digest",
    "clip_by_global_norm",
    "compose_batch",
    "epoch_order",
    "global_norm",
    "init_state",
    "load_checkpoint",
    "lr_at",
    "read_header",
    "save_checkpoint",
    "sgd_step",
    "train",
]
