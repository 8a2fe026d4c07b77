from .metrics import final_position_loss, all_positions_loss, accuracy, bpc
from .loop import (
    LOG_COLUMNS,
    seed_everything,
    warmup_factor,
    build_optimizer,
    fast_forward,
    EpochRecord,
    TrainingLog,
    TrainResult,
    task_loss,
    evaluate,
    headline,
    train,
)

__all__ = [
    "final_position_loss",
    "all_positions_loss",
    "accuracy",
    "bpc",
    "LOG_COLUMNS",
    "seed_everything",
    "warmup_factor",
    "build_optimizer",
    "fast_forward",
    "EpochRecord",
    "TrainingLog",
    "TrainResult",
    "task_loss",
    "evaluate",
    "headline",
    "train",
]
