import logging
from typing import Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from app.engine.metrics.quantile import (
    QUANTILE_LEVELS,
    alpha_grid,
    ecp,
    ecp_curve,
    level_name,
    quantile_loss,
    summarize,
)
from app.engine.model import ForecastSamples
from app.engine.utils.exceptions import DataError

logger = logging.getLogger(__name__)

REPORT_ALPHA = 0.9


class OutputMetrics(BaseModel):
    """
    Metrics of one output dimension.

    Attributes:
    - output (str): Output name.
    - quantile_losses (dict[str, float]): QL by level name, e.g. {"p50": …, "p90": …}.
    - ecp (float): Coverage of the central 90% interval.
    """
    output: str
    quantile_losses: dict[str, float]
    ecp: float


class MetricsReport(BaseModel):
    """
    Evaluation of a forecast against held-out observations, in original units.

    Attributes:
    - outputs (list[OutputMetrics]): One row per output dimension.
    - quantile_losses (dict[str, float]): QL pooled over all outputs.
    - ecp (float): Pooled coverage of the central 90% interval.
    - num_samples, horizon, start (int): Shape and position of the forecast.
    """
    outputs: list[OutputMetrics]
    quantile_losses: dict[str, float]
    ecp: float
    num_samples: int
    horizon: int
    start: int = 0

    @property
    def p50(self) -> float:
        return self.quantile_losses[level_name(0.5)]

    @property
    def p90(self) -> float:
        return self.quantile_losses[level_name(0.9)]

    def describe(self) -> str:
        lines = [f"{'output':<12} " + " ".join(f"{name:>10}" for name in self.quantile_losses) + f" {'ecp90':>10}"]
        for row in self.outputs:
            values = " ".join(f"{value:>10.4f}" for value in row.quantile_losses.values())
            lines.append(f"{row.output:<12} {values} {row.ecp:>10.4f}")
        values = " ".join(f"{value:>10.4f}" for value in self.quantile_losses.values())
        lines.append(f"{'all':<12} {values} {self.ecp:>10.4f}")
        return "\n".join(lines)


def evaluate_run(
        samples: ForecastSamples,
        y: np.ndarray,
        levels: Sequence[float] = QUANTILE_LEVELS,
        alphas: Sequence[float] | None = None,
        per_dimension: bool = False,
) -> tuple[MetricsReport, pd.DataFrame]:
    """
    Quantile losses and coverage of a forecast against the observations it covers.

    :param samples: Forecast samples, K × F × d_y.
    :param y: Observations, F × d_y, in the same units as the samples.
    :param levels: Quantile levels for QL.
    :param alphas: Coverage grid for the curve.
    :param per_dimension: Add per-output columns to the curve.
    :return: The report and the coverage curve.

    :raise DataError: If observations and forecast are not aligned.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape != samples.samples.shape[1:]:
        raise DataError(
            f"Observations {y.shape} are not aligned with the forecast "
            f"(horizon {samples.horizon}, {samples.output_dim} outputs)"
        )

    summary = summarize(samples, levels)
    per_output = ecp(samples, y, REPORT_ALPHA, per_dimension=True)
    outputs = [
        OutputMetrics(
            output=name,
            quantile_losses={level_name(lv): quantile_loss(y[:, i], summary.at(lv)[:, i], lv) for lv in summary.levels},
            ecp=float(per_output[i]),
        )
        for i, name in enumerate(samples.output_names)
    ]
    report = MetricsReport(
        outputs=outputs,
        quantile_losses={level_name(lv): quantile_loss(y, summary.at(lv), lv) for lv in summary.levels},
        ecp=ecp(samples, y, REPORT_ALPHA),
        num_samples=samples.num_samples,
        horizon=samples.horizon,
        start=samples.start,
    )
    curve = ecp_curve(
        samples,
        y,
        alpha_grid() if alphas is None else alphas,
        output_names=samples.output_names if per_dimension else None,
    )
    logger.info("Metrics:\n" + report.describe())
    return report, curve
