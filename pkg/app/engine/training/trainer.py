import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.engine.autodiff import backward, no_grad, scale
from app.engine.data import ChunkSet
from app.engine.model import VRNNaug, unbiased_elbo
from app.engine.training.models import EpochRecord, TrainReport
from app.engine.training.optim import OptimState, adam_step, clip_grad_norm
from app.engine.training.schedule import Termination, lr_schedule
from app.engine.utils.exceptions import DataError, NumericError
from app.engine.utils.rng import derive_rng

logger = logging.getLogger(__name__)

# Key path of the validation noise stream; epoch 0 never trains
VALID_KEYS = (0, 1)


class TrainSettings(BaseModel):
    """
    Optimization settings.

    Attributes:
    - batch_size (int): |B|, chunks per mini-batch.
    - learning_rate (float): Initial Adam learning rate, at most 1e-3.
    - min_learning_rate (float): Training stops once the rate falls below this.
    - check_every (int): Epochs between learning-rate checks.
    - decay (float): Factor applied when validation stagnates.
    - max_epochs (int): Epoch cap.
    - max_grad_norm (float | None): Optional gradient-norm clipping bound.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    batch_size: int = Field(default=128, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0, le=1e-3)
    min_learning_rate: float = Field(default=1e-6, gt=0)
    check_every: int = Field(default=10, ge=1)
    decay: float = Field(default=0.5, gt=0, lt=1)
    max_epochs: int = Field(default=100, ge=1)
    max_grad_norm: float | None = Field(default=None, gt=0)


@dataclass
class TrainerState:
    """
    Everything needed to continue a run after the last completed epoch.

    Attributes:
    - epoch (int): Completed epochs.
    - optim (OptimState): Optimizer state.
    - report (TrainReport): Records so far.
    - best (dict[str, np.ndarray] | None): Parameters of the best validation epoch.
    """
    epoch: int = 0
    optim: OptimState = field(default_factory=OptimState)
    report: TrainReport = field(default_factory=TrainReport)
    best: dict[str, np.ndarray] | None = None

    @classmethod
    def fresh(cls, settings: TrainSettings) -> "TrainerState":
        return cls(optim=OptimState(lr=settings.learning_rate))

    def to_dict(self) -> dict[str, Any]:
        return {
            "epoch": self.epoch,
            "optim": self.optim.to_dict(),
            "report": self.report.to_dict(),
            "best": None if self.best is None else {name: values.tolist() for name, values in self.best.items()},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrainerState":
        best = data.get("best")
        return cls(
            epoch=data["epoch"],
            optim=OptimState.from_dict(data["optim"]),
            report=TrainReport.from_dict(data["report"]),
            best=None if best is None else {name: np.asarray(v, dtype=np.float64) for name, v in best.items()},
        )


@dataclass
class TrainResult:
    model: VRNNaug
    report: TrainReport
    state: TrainerState


EpochCallback = Callable[[TrainerState, VRNNaug], None]


@no_grad()
def evaluate_loss(model: VRNNaug, chunks: ChunkSet, rng: np.random.Generator, batch_size: int) -> float:
    """
    Mean negative ELBO per chunk, batches taken in order with noise from rng.

    :param model: The model.
    :param chunks: The chunks to score.
    :param rng: Noise source; the trainer passes the same stream every epoch.
    :param batch_size: Chunks per forward pass.
    :return: The loss.
    """
    total = 0.0
    for index in chunks.batches(batch_size):
        total -= float(np.sum(model.elbo_batch(chunks.u[index], chunks.y[index], rng).values))
    return total / len(chunks)


def _train_epoch(
        model: VRNNaug,
        chunks: ChunkSet,
        settings: TrainSettings,
        state: TrainerState,
        rng: np.random.Generator,
        epoch: int,
) -> float:
    total = 0.0
    for number, index in enumerate(chunks.batches(settings.batch_size, rng), start=1):
        try:
            model.params.zero_grad()
            elbos = model.elbo_batch(chunks.u[index], chunks.y[index], rng)
            loss = scale(unbiased_elbo(elbos, len(chunks)), -1.0)
            backward(loss)
            if settings.max_grad_norm is not None:
                clip_grad_norm(model.params, settings.max_grad_norm)
            adam_step(model.params, state.optim)
        except NumericError as error:
            raise NumericError(f"Epoch {epoch}, batch {number}: {error}") from error

        batch_loss = -float(np.sum(elbos.values))
        logger.debug(f"Epoch {epoch} batch {number}: loss per chunk {batch_loss / len(index):.6f}")
        total += batch_loss
    return total / len(chunks)


def train(
        model: VRNNaug,
        train_chunks: ChunkSet,
        valid_chunks: ChunkSet,
        settings: TrainSettings | None = None,
        seed: int = 0,
        state: TrainerState | None = None,
        on_epoch: EpochCallback | None = None,
) -> TrainResult:
    """
    Fit the model by stochastic maximization of the unbiased mini-batch ELBO.

    Each epoch shuffles the training chunks with a generator derived from (seed, epoch), takes one Adam step per
    mini-batch and scores the validation chunks with a fixed noise stream derived from (seed, epoch). The parameters
    of the earliest epoch with the lowest validation loss are restored at the end.

    :param model: The model, trained in place.
    :param train_chunks: Training chunks.
    :param valid_chunks: Validation chunks.
    :param settings: Optimization settings.
    :param seed: Master seed.
    :param state: State to resume from; epoch numbering continues.
    :param on_epoch: Called after every completed epoch.
    :return: The model, its report and the final trainer state.

    :raise NumericError: With epoch and batch context.
    """
    settings = settings or TrainSettings()
    if len(train_chunks) == 0 or len(valid_chunks) == 0:
        raise DataError("Training needs non-empty train and validation chunk sets")

    state = state or TrainerState.fresh(settings)
    report = state.report
    if report.termination == Termination.LR_FLOOR.value or state.epoch >= settings.max_epochs:
        logger.info(f"Nothing to do: {state.epoch} epochs done, termination {report.termination}")
    else:
        report.termination = None
        if state.epoch:
            logger.info(f"Resuming after epoch {state.epoch} at lr {state.optim.lr:g}")

    while report.termination is None and state.epoch < settings.max_epochs:
        epoch = state.epoch + 1
        started = time.perf_counter()
        train_loss = _train_epoch(model, train_chunks, settings, state, derive_rng(seed, epoch), epoch)
        valid_loss = evaluate_loss(model, valid_chunks, derive_rng(seed, *VALID_KEYS), settings.batch_size)
        if not np.isfinite(valid_loss):
            raise NumericError(f"Epoch {epoch}: non-finite validation loss")

        lr = state.optim.lr
        report.records.append(EpochRecord(epoch, train_loss, valid_loss, lr, time.perf_counter() - started))
        if report.best_valid_loss is None or valid_loss < report.best_valid_loss:
            report.best_epoch, report.best_valid_loss = epoch, valid_loss
            state.best = model.params.snapshot()
        logger.info(f"Epoch {epoch}: train {train_loss:.6f}, valid {valid_loss:.6f}, lr {lr:g}")

        decision = lr_schedule(
            epoch,
            report.valid_losses,
            lr,
            check_every=settings.check_every,
            decay=settings.decay,
            min_lr=settings.min_learning_rate,
            max_epochs=settings.max_epochs,
        )
        if decision.halved:
            logger.warning(f"Validation stagnated at epoch {epoch}: lr {lr:g} -> {decision.lr:g}")
        state.optim.lr = decision.lr
        state.epoch = epoch
        if decision.stop is not None:
            report.termination = decision.stop.value
            logger.info(f"Training stopped after epoch {epoch}: {report.termination}")

        if on_epoch is not None:
            on_epoch(state, model)

    if state.best is not None:
        model.params.restore(state.best)
    return TrainResult(model, report, state)
