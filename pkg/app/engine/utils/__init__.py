from .exceptions import (
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    EngineError,
    MetricError,
    MissingInputError,
    NumericError,
)
from .rng import derive_rng, spawn_generators

__all__ = [
    "ConfigError",
    "ContractError",
    "DataError",
    "DimensionError",
    "EngineError",
    "MetricError",
    "MissingInputError",
    "NumericError",
    "derive_rng",
    "spawn_generators",
]
