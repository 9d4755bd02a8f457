import json
from dataclasses import asdict, dataclass, field

import pandas as pd


@dataclass
class EpochRecord:
    """Data class representing one completed training epoch."""
    epoch: int
    train_loss: float
    valid_loss: float
    lr: float
    seconds: float = 0.0

    def to_dict(self) -> dict:
        """
        Converts EpochRecord object to a dictionary.

        :return: Dictionary representation of EpochRecord.
        """
        return asdict(self)


@dataclass
class TrainReport:
    """
    Data class representing the outcome of a training run.

    Losses are mean negative ELBO per chunk. Wall-clock seconds are kept in the JSON report only, so the CSV trace
    is reproducible byte for byte.
    """
    records: list[EpochRecord] = field(default_factory=list)
    termination: str | None = None
    best_epoch: int | None = None
    best_valid_loss: float | None = None

    @property
    def train_losses(self) -> list[float]:
        return [record.train_loss for record in self.records]

    @property
    def valid_losses(self) -> list[float]:
        return [record.valid_loss for record in self.records]

    @property
    def learning_rates(self) -> list[float]:
        return [record.lr for record in self.records]

    def to_dict(self) -> dict:
        """
        Converts TrainReport object to a dictionary.

        :return: Dictionary representation of TrainReport.
        """
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainReport":
        records = [EpochRecord(**record) for record in data.get("records", [])]
        return cls(records, data.get("termination"), data.get("best_epoch"), data.get("best_valid_loss"))

    def trace_csv(self) -> str:
        """
        Per-epoch loss and learning-rate trace without timings.

        :return: CSV text with columns epoch, train_loss, valid_loss, lr.
        """
        frame = pd.DataFrame(
            [(r.epoch, r.train_loss, r.valid_loss, r.lr) for r in self.records],
            columns=["epoch", "train_loss", "valid_loss", "lr"],
        )
        return frame.to_csv(index=False, float_format="%.17g")
