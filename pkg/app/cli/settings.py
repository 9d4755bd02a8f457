import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.engine.data import check_fractions
from app.engine.model import ModelConfig, Variant
from app.engine.training import TrainSettings
from app.engine.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)


class Loader(str, Enum):
    CSV = "csv"
    MOTORCYCLE = "motorcycle"


class RunConfig(BaseModel):
    """
    Fully resolved settings of one experiment run; every default is the standard benchmark setting.

    Attributes:
    - preset (str): Preset the run started from.
    - loader (Loader): csv (named columns) or motorcycle (two unnamed columns).
    - data (Path | None): Dataset file.
    - test_data (Path | None): Separate test file; the dataset is then split into train and validation only.
    - u_columns, y_columns (list[str]): Column selections; no input columns means the row index is the input.
    - splits (tuple[float, float, float]): Chronological train/valid/test fractions.
    - train_fraction (float | None): Train share of the dataset when test_data is given.
    - whole_series (bool): Train, validate and test on the whole series.
    - window (int): Chunk size W.
    - latent_dim, hidden_size, mlp_min_width (int): Architecture.
    - variant (Variant): full, v1 or v2.
    - hybrid_gradient (bool): Gradient flow through the sampled output in the hybrid input.
    - seed (int): Master seed.
    - train (TrainSettings): Optimization settings.
    - num_samples (int): K, forecast trajectories.
    - horizon (int | None): F for the test forecast, the whole test segment by default.
    - warm_start (bool): Condition the test forecast on the preceding validation rows.
    - per_dimension_ecp (bool): Per-output coverage columns in the ECP curve.
    """
    model_config = ConfigDict(extra="forbid")

    preset: str = "benchmark"
    loader: Loader = Loader.CSV
    data: Path | None = None
    test_data: Path | None = None
    u_columns: list[str] = Field(default_factory=list)
    y_columns: list[str] = Field(default_factory=list)
    splits: tuple[float, float, float] = (0.5, 0.2, 0.3)
    train_fraction: float | None = Field(default=None, gt=0, lt=1)
    whole_series: bool = False
    window: int = Field(default=64, ge=1)
    latent_dim: int = Field(default=10, ge=1)
    hidden_size: int = Field(default=100, ge=1)
    mlp_min_width: int = Field(default=50, ge=1)
    variant: Variant = Variant.FULL
    hybrid_gradient: bool = False
    seed: int = Field(default=0, ge=0)
    train: TrainSettings = Field(default_factory=TrainSettings)
    num_samples: int = Field(default=100, ge=2)
    horizon: int | None = Field(default=None, ge=1)
    warm_start: bool = False
    per_dimension_ecp: bool = False

    @field_validator("splits")
    @classmethod
    def check_splits(cls, splits: tuple[float, float, float]) -> tuple[float, float, float]:
        try:
            return check_fractions(splits)
        except ConfigError as error:
            raise ValueError(str(error))

    @model_validator(mode="after")
    def check_columns(self) -> "RunConfig":
        if self.loader == Loader.CSV and self.data is not None and not self.y_columns:
            raise ValueError("A csv dataset needs at least one output column (--y-columns)")
        return self

    @property
    def valid_train_fraction(self) -> float:
        """
        Train share used when the test data comes from a separate file.
        """
        if self.train_fraction is not None:
            return self.train_fraction
        return self.splits[0] / (self.splits[0] + self.splits[1])

    def build_model_config(self, input_dim: int, output_dim: int) -> ModelConfig:
        return ModelConfig(
            input_dim=input_dim,
            output_dim=output_dim,
            latent_dim=self.latent_dim,
            hidden_size=self.hidden_size,
            variant=self.variant,
            num_samples=self.num_samples,
            mlp_min_width=self.mlp_min_width,
            hybrid_gradient=self.hybrid_gradient,
        )

    def run_name(self) -> str:
        stem = self.data.stem if self.data is not None else self.preset
        return f"{stem}-{self.variant.value}-seed{self.seed}"


# Overrides applied on top of the defaults, before any config file or flag
PRESETS: dict[str, dict[str, Any]] = {
    "benchmark": {},
    "toy": {"train": {"max_epochs": 200}},
    "motorcycle": {
        "loader": "motorcycle",
        "window": 133,
        "latent_dim": 20,
        "whole_series": True,
        "train": {"max_epochs": 200},
    },
    "compressor": {"splits": (0.8, 0.1, 0.1), "window": 128},
}


def _merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict):
            merged[key] = _merge(merged.get(key) if isinstance(merged.get(key), dict) else {}, value)
        else:
            merged[key] = value
    return merged


def read_config_file(path: Path) -> dict[str, Any]:
    """
    Read a JSON run configuration.

    :raise ConfigError: If the file is missing or not a JSON object.
    """
    try:
        payload = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except json.JSONDecodeError as ex:
        raise ConfigError(f"{path}: invalid JSON: {ex}")
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: a run configuration must be a JSON object")
    return payload


def resolve_config(
        preset: str | None = None,
        config_file: Path | None = None,
        overrides: dict[str, Any] | None = None,
) -> RunConfig:
    """
    Resolve a run configuration: preset, then JSON config file, then explicit overrides.

    None-valued overrides are ignored, so unset flags never mask earlier layers.

    :param preset: Preset name; the one named in the config file, or benchmark, when omitted.
    :param config_file: Optional JSON configuration.
    :param overrides: Explicit settings, usually from command-line flags.
    :return: The validated configuration.

    :raise ConfigError: On an unknown preset or unreadable config file.
    :raise pydantic.ValidationError: On invalid settings.
    """
    from_file = read_config_file(config_file) if config_file is not None else {}
    preset = preset or from_file.get("preset") or "benchmark"
    if preset not in PRESETS:
        raise ConfigError(f"Unknown preset {preset!r}; choose one of {sorted(PRESETS)}")

    merged = _merge({"preset": preset}, PRESETS[preset])
    merged = _merge(merged, from_file)
    merged = _merge(merged, overrides or {})
    merged["preset"] = preset
    config = RunConfig.model_validate(merged)
    logger.debug(f"Resolved run configuration: {config.model_dump_json()}")
    return config


def require_data(config: RunConfig) -> Path:
    if config.data is None:
        raise ConfigError("No dataset given (--data)")
    return config.data
