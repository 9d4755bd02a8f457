from .quantile import (
    QUANTILE_LEVELS,
    QuantileSummary,
    alpha_grid,
    ecp,
    ecp_curve,
    empirical_quantile,
    level_name,
    quantile_column,
    quantile_loss,
    summarize,
)
from .report import MetricsReport, OutputMetrics, evaluate_run

__all__ = [
    "MetricsReport",
    "OutputMetrics",
    "QUANTILE_LEVELS",
    "QuantileSummary",
    "alpha_grid",
    "ecp",
    "ecp_curve",
    "empirical_quantile",
    "evaluate_run",
    "level_name",
    "quantile_column",
    "quantile_loss",
    "summarize",
]
