from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from app.engine.utils.exceptions import ContractError


class Termination(str, Enum):
    LR_FLOOR = "lr_floor"
    MAX_EPOCHS = "max_epochs"


@dataclass(frozen=True)
class ScheduleDecision:
    lr: float
    halved: bool = False
    stop: Termination | None = None


def lr_schedule(
        epoch: int,
        valid_history: Sequence[float],
        lr: float,
        check_every: int = 10,
        decay: float = 0.5,
        min_lr: float = 1e-6,
        max_epochs: int = 100,
) -> ScheduleDecision:
    """
    Validation-gated learning-rate decay with the two termination rules.

    At epochs 2·check_every, 3·check_every, … the rate is multiplied by decay unless the best validation loss of the
    last check_every epochs is strictly below the best one before them. Training stops once the rate drops below
    min_lr or max_epochs epochs are complete.

    :param epoch: Number of completed epochs, 1-based.
    :param valid_history: One validation loss per completed epoch.
    :param lr: Current learning rate.
    :return: The new rate and whether to stop.
    """
    if len(valid_history) != epoch:
        raise ContractError(f"Validation history has {len(valid_history)} entries after {epoch} epochs")

    halved = False
    if epoch > check_every and epoch % check_every == 0:
        recent = min(valid_history[epoch - check_every:])
        before = min(valid_history[:epoch - check_every])
        if not recent < before:
            lr *= decay
            halved = True

    stop = None
    if lr < min_lr:
        stop = Termination.LR_FLOOR
    elif epoch >= max_epochs:
        stop = Termination.MAX_EPOCHS
    return ScheduleDecision(lr, halved, stop)
