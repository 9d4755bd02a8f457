from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from app.engine.model import ForecastSamples
from app.engine.utils.exceptions import ContractError, DimensionError, MetricError

QUANTILE_LEVELS = (0.5, 0.9)


def alpha_grid(step: float = 0.05) -> np.ndarray:
    """
    Coverage levels step, 2·step, … strictly inside (0, 1): 0.05 … 0.95 by default.
    """
    count = int(round(1 / step))
    return np.round(np.arange(1, count) * step, 10)


def level_name(level: float) -> str:
    """
    Short name of a quantile level: 0.5 -> "p50", 0.9 -> "p90".
    """
    return f"p{level * 100:g}"


def quantile_column(level: float) -> str:
    """
    Column suffix of a quantile level: 0.05 -> "q05", 0.5 -> "q50", 0.95 -> "q95".
    """
    return f"q{level * 100:02g}"


def _as_samples(samples: ForecastSamples | np.ndarray) -> np.ndarray:
    return samples.samples if isinstance(samples, ForecastSamples) else np.asarray(samples, dtype=np.float64)


def empirical_quantile(samples: np.ndarray, level: float, axis: int = 0) -> np.ndarray | float:
    """
    Linear-interpolated order statistic at 0-based rank level·(K − 1).

    :param samples: Sample values, K along axis.
    :param level: ρ in [0, 1].
    :param axis: Sample axis.
    :return: The quantile, reduced over axis.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0 or samples.shape[axis] == 0:
        raise MetricError("Cannot take a quantile of an empty sample set")
    if not 0 <= level <= 1:
        raise ContractError(f"Quantile level must lie in [0, 1], got {level}")
    result = np.quantile(samples, level, axis=axis, method="linear")
    return float(result) if np.ndim(result) == 0 else result


@dataclass(frozen=True)
class QuantileSummary:
    """
    Empirical quantiles and sample mean of a forecast, per time step and output dimension.

    Attributes:
    - levels (tuple[float, ...]): Quantile levels, ascending.
    - values (np.ndarray): len(levels) × F × d_y.
    - mean (np.ndarray): F × d_y.
    """
    levels: tuple[float, ...]
    values: np.ndarray
    mean: np.ndarray

    def at(self, level: float) -> np.ndarray:
        return self.values[self.levels.index(level)]

    def to_frame(self, output_names: Sequence[str], start: int = 0) -> pd.DataFrame:
        """
        Wide table with one row per time step: t, then per output <name>_q05, <name>_q50, … and <name>_mean.
        """
        horizon, outputs = self.mean.shape
        if len(output_names) != outputs:
            raise DimensionError(f"{len(output_names)} output names for {outputs} outputs")
        columns: dict[str, np.ndarray] = {"t": np.arange(start, start + horizon)}
        for i, name in enumerate(output_names):
            for level, values in zip(self.levels, self.values):
                columns[f"{name}_{quantile_column(level)}"] = values[:, i]
            columns[f"{name}_mean"] = self.mean[:, i]
        return pd.DataFrame(columns)


def summarize(samples: ForecastSamples | np.ndarray, levels: Sequence[float] = QUANTILE_LEVELS) -> QuantileSummary:
    """
    Summarize K ≥ 2 trajectories by empirical quantiles and the sample mean.

    :param samples: K × F × d_y samples.
    :param levels: Quantile levels.
    :return: The summary.
    """
    values = _as_samples(samples)
    if values.ndim != 3:
        raise DimensionError(f"Samples must be K × F × d_y, got {values.shape}")
    if values.shape[0] < 2:
        raise ContractError(f"A quantile summary needs at least 2 samples, got {values.shape[0]}")
    levels = tuple(sorted(float(level) for level in levels))
    quantiles = np.stack([empirical_quantile(values, level) for level in levels])
    return QuantileSummary(levels, quantiles, values.mean(axis=0))


def quantile_loss(y: np.ndarray, y_hat: np.ndarray, level: float) -> float:
    """
    Normalized quantile loss QL_ρ = 2·Σ P_ρ / Σ|y| with the pinball penalty
    P_ρ = ρ(y − ŷ) when y > ŷ, otherwise (1 − ρ)(ŷ − y).

    :param y: Observations.
    :param y_hat: Predicted ρ-quantiles, same shape.
    :param level: ρ in [0, 1].
    :return: The loss, ≥ 0.

    :raise MetricError: If every observation is zero.
    """
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise DimensionError(f"Observations {y.shape} and predictions {y_hat.shape} differ in shape")
    if not 0 <= level <= 1:
        raise ContractError(f"Quantile level must lie in [0, 1], got {level}")
    scale = np.sum(np.abs(y))
    if scale == 0:
        raise MetricError("Quantile loss is undefined when all observations are zero")
    penalty = np.where(y > y_hat, level * (y - y_hat), (1 - level) * (y_hat - y))
    return float(2 * np.sum(penalty) / scale)


def _coverage(values: np.ndarray, y: np.ndarray, alpha: float) -> np.ndarray:
    if not 0 < alpha < 1:
        raise ContractError(f"Coverage level must lie in (0, 1), got {alpha}")
    lower = np.quantile(values, (1 - alpha) / 2, axis=0)
    upper = np.quantile(values, (1 + alpha) / 2, axis=0)
    return (y >= lower) & (y <= upper)


def _check_alignment(values: np.ndarray, y: np.ndarray) -> None:
    if values.ndim != 3 or y.shape != values.shape[1:]:
        raise DimensionError(f"Observations {y.shape} do not match samples {values.shape}")


def ecp(
        samples: ForecastSamples | np.ndarray,
        y: np.ndarray,
        alpha: float,
        per_dimension: bool = False,
) -> float | np.ndarray:
    """
    Empirical coverage: share of (t, dimension) pairs whose observation lies in the central α-interval of the samples.

    :param samples: K × F × d_y samples.
    :param y: F × d_y observations.
    :param alpha: Interval level in (0, 1).
    :param per_dimension: Return one coverage per output dimension instead of the pooled value.
    :return: Coverage in [0, 1].
    """
    values = _as_samples(samples)
    y = np.asarray(y, dtype=np.float64)
    _check_alignment(values, y)
    inside = _coverage(values, y, alpha)
    return inside.mean(axis=0) if per_dimension else float(inside.mean())


def ecp_curve(
        samples: ForecastSamples | np.ndarray,
        y: np.ndarray,
        alphas: Sequence[float] | None = None,
        output_names: Sequence[str] | None = None,
) -> pd.DataFrame:
    """
    Coverage over a grid of interval levels.

    :param samples: K × F × d_y samples.
    :param y: F × d_y observations.
    :param alphas: Levels, the default grid when omitted.
    :param output_names: When given, add a coverage column per output dimension.
    :return: Table with columns alpha, coverage and optionally coverage_<name>.
    """
    alphas = alpha_grid() if alphas is None else np.asarray(alphas, dtype=np.float64)
    rows = []
    for alpha in alphas:
        row = {"alpha": float(alpha), "coverage": ecp(samples, y, alpha)}
        if output_names is not None:
            for name, value in zip(output_names, ecp(samples, y, alpha, per_dimension=True)):
                row[f"coverage_{name}"] = float(value)
        rows.append(row)
    return pd.DataFrame(rows)
