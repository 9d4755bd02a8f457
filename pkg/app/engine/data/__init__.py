from .io import load_columns, load_csv, load_motorcycle, write_csv
from .series import (
    ChunkSet,
    Standardizer,
    TimeSeries,
    check_fractions,
    chrono_split,
    fit_standardizer,
    shingle,
    split_train_valid,
)
from .synthetic import (
    InputMode,
    LinearGaussianSystem,
    excitation_input,
    simulate_linear_gaussian,
    sinusoid_input,
)

__all__ = [
    "ChunkSet",
    "InputMode",
    "LinearGaussianSystem",
    "Standardizer",
    "TimeSeries",
    "check_fractions",
    "chrono_split",
    "excitation_input",
    "fit_standardizer",
    "load_columns",
    "load_csv",
    "load_motorcycle",
    "shingle",
    "simulate_linear_gaussian",
    "sinusoid_input",
    "split_train_valid",
    "write_csv",
]
