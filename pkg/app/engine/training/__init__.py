from .models import EpochRecord, TrainReport
from .optim import OptimState, adam_step, clip_grad_norm
from .schedule import ScheduleDecision, Termination, lr_schedule
from .trainer import TrainerState, TrainResult, TrainSettings, evaluate_loss, train

__all__ = [
    "EpochRecord",
    "OptimState",
    "ScheduleDecision",
    "Termination",
    "TrainReport",
    "TrainResult",
    "TrainSettings",
    "TrainerState",
    "adam_step",
    "clip_grad_norm",
    "evaluate_loss",
    "lr_schedule",
    "train",
]
