import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from app.cli.settings import RunConfig
from app.engine.data import Standardizer
from app.engine.metrics import MetricsReport
from app.engine.model import ForecastSamples, ModelConfig, VRNNaug
from app.engine.nn import dump_params, load_params, read_checkpoint
from app.engine.training import TrainerState, TrainReport
from app.engine.utils.exceptions import DataError

logger = logging.getLogger(__name__)

RESUME_FORMAT = "vrnnaug-resume"


@dataclass
class Checkpoint:
    """
    Data class representing a trained model with everything needed to forecast in original units.

    Attributes:
    - model (VRNNaug): The model with its best-validation parameters.
    - standardizer (Standardizer): Statistics fitted on the training split.
    - u_names, y_names (list[str]): Input and output column names.
    - time_index (bool): Whether the input is the row index rather than a dataset column.
    - seed (int): Master seed of the run.
    """
    model: VRNNaug
    standardizer: Standardizer
    u_names: list[str]
    y_names: list[str]
    time_index: bool = False
    seed: int = 0

    def to_json(self) -> str:
        return dump_params(
            self.model.params,
            model=self.model.config.model_dump(mode="json"),
            standardizer=self.standardizer.to_dict(),
            u_names=self.u_names,
            y_names=self.y_names,
            time_index=self.time_index,
            seed=self.seed,
        )

    @classmethod
    def from_json(cls, text: str) -> "Checkpoint":
        payload = read_checkpoint(text)
        model = VRNNaug(ModelConfig.model_validate(payload["model"]), seed=payload["seed"])
        load_params(payload, model.params)
        return cls(
            model=model,
            standardizer=Standardizer.from_dict(payload["standardizer"]),
            u_names=list(payload["u_names"]),
            y_names=list(payload["y_names"]),
            time_index=payload["time_index"],
            seed=payload["seed"],
        )


class RunStorage:
    """Class for managing the files of one run directory."""

    CONFIG = "config.json"
    CHECKPOINT = "checkpoint.json"
    LAST = "last.json"
    REPORT = "train_report.json"
    TRACE = "train_trace.csv"
    SAMPLES = "forecast_samples.json"
    QUANTILES = "forecast_quantiles.csv"
    METRICS = "metrics.json"
    ECP = "ecp_curve.csv"
    TEST = "test.csv"

    def __init__(self, root: Path) -> None:
        """
        Initializes the RunStorage instance.

        :param root: The run directory; created on the first write.
        """
        self.root = Path(root)

    def path(self, name: str) -> Path:
        return self.root / name

    def _get(self, name: str) -> str | None:
        """
        Reads a file of the run directory.

        :param name: The file name.
        :return: The text or None if the file does not exist.
        """
        path = self.path(name)
        return path.read_text() if path.is_file() else None

    def _set(self, name: str, value: str) -> Path:
        """
        Writes a file of the run directory, replacing it atomically.

        :param name: The file name.
        :param value: The text to be written.
        :return: The path written.
        """
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path(name)
        partial = path.with_name(path.name + ".partial")
        partial.write_text(value)
        os.replace(partial, path)
        return path

    def _require(self, name: str) -> str:
        text = self._get(name)
        if text is None:
            raise DataError(f"{self.path(name)} does not exist")
        return text

    def save_config(self, config: RunConfig) -> Path:
        return self._set(self.CONFIG, config.model_dump_json(indent=2))

    def save_checkpoint(self, checkpoint: Checkpoint) -> Path:
        return self._set(self.CHECKPOINT, checkpoint.to_json())

    def load_checkpoint(self) -> Checkpoint:
        """
        Loads the trained model of the run.

        :return: The checkpoint.
        """
        return Checkpoint.from_json(self._require(self.CHECKPOINT))

    def save_last(self, state: TrainerState, model: VRNNaug) -> Path:
        """
        Saves the state after the last completed epoch, with the current (not the best) parameters.

        :param state: The trainer state.
        :param model: The model being trained.
        """
        return self._set(self.LAST, dump_params(model.params, kind=RESUME_FORMAT, trainer=state.to_dict()))

    def load_last(self, model: VRNNaug) -> TrainerState:
        """
        Restores the current parameters into model and returns the trainer state to resume from.

        :param model: A model built from the run's configuration.
        :return: The trainer state.
        """
        payload = read_checkpoint(self._require(self.LAST))
        if payload.get("kind") != RESUME_FORMAT:
            raise DataError(f"{self.path(self.LAST)} is not a resume file")
        load_params(payload, model.params)
        return TrainerState.from_dict(payload["trainer"])

    def save_report(self, report: TrainReport) -> None:
        self._set(self.REPORT, report.to_json())
        self._set(self.TRACE, report.trace_csv())

    def save_forecast(self, samples: ForecastSamples, quantiles: pd.DataFrame, root: Path | None = None) -> Path:
        """
        Saves raw forecast samples and their quantile table.

        :param samples: The samples.
        :param quantiles: The quantile table.
        :param root: Another directory to write to instead of the run directory.
        :return: The sample file path.
        """
        storage = self if root is None else RunStorage(root)
        storage._set(self.QUANTILES, quantiles.to_csv(index=False))
        return storage._set(self.SAMPLES, samples.to_json())

    def load_forecast(self) -> ForecastSamples:
        return ForecastSamples.from_json(self._require(self.SAMPLES))

    def save_metrics(self, report: MetricsReport, curve: pd.DataFrame) -> Path:
        self._set(self.ECP, curve.to_csv(index=False))
        return self._set(self.METRICS, report.model_dump_json(indent=2))

    def load_metrics(self) -> MetricsReport:
        return MetricsReport.model_validate(json.loads(self._require(self.METRICS)))
