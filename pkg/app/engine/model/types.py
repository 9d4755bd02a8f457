import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.engine.autodiff import Tensor
from app.engine.utils.exceptions import ContractError, DataError, DimensionError


class Variant(str, Enum):
    """
    Model variants: the complete model and the two ablations.

    - FULL: generalized auto-regression over z, u and the hybrid output.
    - V1: z̄ and ū streams bypassed, only the lagged output is auto-regressed.
    - V2: all streams kept, but the y-stream is fed y_{t-1} instead of the hybrid.
    """
    FULL = "full"
    V1 = "v1"
    V2 = "v2"


class Mode(str, Enum):
    TRAIN = "train"
    PREDICT = "predict"


class ModelConfig(BaseModel):
    """
    Architectural hyperparameters of the model.

    Attributes:
    - input_dim (int): d_u, width of the input signal.
    - output_dim (int): d_y, width of the observations.
    - latent_dim (int): d_z, width of the latent state.
    - hidden_size (int): GRU hidden width.
    - variant (Variant): full, v1 or v2.
    - num_samples (int): K, Monte-Carlo trajectories per forecast.
    - logvar_min, logvar_max (float): Clamp bounds applied to every log-variance.
    - mlp_min_width (int): Lower bound of the MLP hidden width max(d_x, mlp_min_width).
    - hybrid_gradient (bool): Let gradients flow through the sampled ŷ in the hybrid output.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    input_dim: int = Field(ge=1)
    output_dim: int = Field(ge=1)
    latent_dim: int = Field(default=10, ge=1)
    hidden_size: int = Field(default=100, ge=1)
    variant: Variant = Variant.FULL
    num_samples: int = Field(default=100, ge=1)
    logvar_min: float = -10.0
    logvar_max: float = 10.0
    mlp_min_width: int = Field(default=50, ge=1)
    hybrid_gradient: bool = False

    @model_validator(mode="after")
    def check_clamp(self) -> "ModelConfig":
        if not self.logvar_min < self.logvar_max:
            raise ValueError("logvar_min must be below logvar_max")
        return self


@dataclass(frozen=True)
class GaussianDiag:
    """
    Diagonal Gaussian given by its mean and log-variance.
    """
    mean: Tensor
    log_var: Tensor

    def __post_init__(self) -> None:
        if self.mean.shape != self.log_var.shape:
            raise DimensionError(f"GaussianDiag: mean {self.mean.shape} != log-variance {self.log_var.shape}")


@dataclass
class EncoderState:
    """
    Recurrent state carried between time steps, one row per chunk or trajectory.

    Attributes:
    - h_z, h_u (Tensor | None): GRU states of the latent and input streams (None under v1).
    - h_y (Tensor): GRU state of the output stream.
    - z_prev (Tensor): Previous latent sample ẑ_{t-1}.
    - y_prev (Tensor): Previous observation y_{t-1} (training) or the previous sample (prediction).
    - y_hat_prev (Tensor): Previous output sample ŷ_{t-1}.
    """
    h_z: Tensor | None
    h_u: Tensor | None
    h_y: Tensor
    z_prev: Tensor
    y_prev: Tensor
    y_hat_prev: Tensor

    @classmethod
    def zeros(cls, config: ModelConfig, batch: int) -> "EncoderState":
        """
        Cold-start state: every field is zero.

        :param config: The model configuration.
        :param batch: Number of rows.
        :return: The zero state.
        """
        def zeros(width: int) -> Tensor:
            return Tensor.zeros(batch, width)

        bypass = config.variant == Variant.V1
        return cls(
            h_z=None if bypass else zeros(config.hidden_size),
            h_u=None if bypass else zeros(config.hidden_size),
            h_y=zeros(config.hidden_size),
            z_prev=zeros(config.latent_dim),
            y_prev=zeros(config.output_dim),
            y_hat_prev=zeros(config.output_dim),
        )

    @property
    def batch(self) -> int:
        return self.h_y.shape[0]

    def repeat(self, count: int) -> "EncoderState":
        """
        Replicate a single-row state into count identical constant rows.
        """
        if self.batch != 1:
            raise ContractError(f"Only a single-row state can be replicated, got {self.batch} rows")

        def tile(tensor: Tensor | None) -> Tensor | None:
            return None if tensor is None else Tensor(np.repeat(tensor.values, count, axis=0))

        return replace(
            self,
            h_z=tile(self.h_z),
            h_u=tile(self.h_u),
            h_y=tile(self.h_y),
            z_prev=tile(self.z_prev),
            y_prev=tile(self.y_prev),
            y_hat_prev=tile(self.y_hat_prev),
        )

    def row(self, index: int) -> "EncoderState":
        """
        Constant single-row state holding row index.
        """
        def take(tensor: Tensor | None) -> Tensor | None:
            return None if tensor is None else Tensor(tensor.values[index:index + 1])

        return replace(
            self,
            h_z=take(self.h_z),
            h_u=take(self.h_u),
            h_y=take(self.h_y),
            z_prev=take(self.z_prev),
            y_prev=take(self.y_prev),
            y_hat_prev=take(self.y_hat_prev),
        )


FORECAST_FORMAT = "vrnnaug-forecast"


@dataclass
class ForecastSamples:
    """
    Monte-Carlo output samples over a forecast horizon.

    Attributes:
    - samples (np.ndarray): Array K × F × d_y.
    - output_names (list[str]): Names of the output dimensions.
    - start (int): Time index of the first forecast step.
    - seed (int | None): Seed the trajectories were drawn with.
    """
    samples: np.ndarray
    output_names: list[str]
    start: int = 0
    seed: int | None = None

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 3 or self.samples.shape[0] < 1:
            raise DimensionError(f"Forecast samples must be K × F × d_y with K >= 1, got {self.samples.shape}")
        if len(self.output_names) != self.samples.shape[2]:
            raise DimensionError(f"{len(self.output_names)} output names for {self.samples.shape[2]} outputs")
        if not np.all(np.isfinite(self.samples)):
            raise ContractError("Forecast samples contain non-finite values")

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def horizon(self) -> int:
        return self.samples.shape[1]

    @property
    def output_dim(self) -> int:
        return self.samples.shape[2]

    def quantiles(self, levels: Sequence[float]) -> np.ndarray:
        """
        Empirical quantiles over the K samples, linear interpolation between order statistics.

        :param levels: Quantile levels in [0, 1].
        :return: Array len(levels) × F × d_y.
        """
        return np.quantile(self.samples, np.asarray(levels, dtype=np.float64), axis=0)

    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    def with_samples(self, samples: np.ndarray) -> "ForecastSamples":
        return replace(self, samples=samples)

    def to_json(self) -> str:
        return json.dumps({
            "format": FORECAST_FORMAT,
            "output_names": self.output_names,
            "start": self.start,
            "seed": self.seed,
            "shape": list(self.samples.shape),
            "samples": self.samples.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "ForecastSamples":
        payload = json.loads(text)
        if payload.get("format") != FORECAST_FORMAT:
            raise DataError(f"Not a forecast sample file: format={payload.get('format')!r}")
        samples = np.asarray(payload["samples"], dtype=np.float64).reshape(payload["shape"])
        return cls(samples, list(payload["output_names"]), payload["start"], payload["seed"])
