import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.engine.utils.exceptions import ConfigError, ContractError, DataError

logger = logging.getLogger(__name__)

FRACTION_TOLERANCE = 1e-9


def _as_matrix(values: Any) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return values[:, None] if values.ndim == 1 else values


@dataclass
class TimeSeries:
    """
    Aligned input signals u_{1:T} and observations y_{1:T}.

    Attributes:
    - u (np.ndarray): T × d_u inputs.
    - y (np.ndarray): T × d_y observations.
    - u_names, y_names (list[str]): Column names.
    - label (str): Provenance label.
    - standardizer (Standardizer | None): Statistics the values were standardized with, if any.
    - offset (int): Index of the first row within the series it was cut from.
    """
    u: np.ndarray
    y: np.ndarray
    u_names: list[str]
    y_names: list[str]
    label: str = ""
    standardizer: "Standardizer | None" = None
    offset: int = 0

    def __post_init__(self) -> None:
        self.u = _as_matrix(self.u)
        self.y = _as_matrix(self.y)
        if self.u.shape[0] != self.y.shape[0]:
            raise DataError(f"u has {self.u.shape[0]} rows but y has {self.y.shape[0]}")
        if len(self.u_names) != self.u.shape[1] or len(self.y_names) != self.y.shape[1]:
            raise DataError("Column names do not match the matrix widths")

    @property
    def length(self) -> int:
        return self.u.shape[0]

    @property
    def input_dim(self) -> int:
        return self.u.shape[1]

    @property
    def output_dim(self) -> int:
        return self.y.shape[1]

    def segment(self, start: int, stop: int, label: str) -> "TimeSeries":
        return replace(
            self,
            u=self.u[start:stop].copy(),
            y=self.y[start:stop].copy(),
            label=label,
            offset=self.offset + start,
        )


@dataclass(frozen=True)
class Standardizer:
    """
    Per-dimension mean and population standard deviation of inputs and outputs.
    """
    u_mean: np.ndarray
    u_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray

    @classmethod
    def fit(cls, train: TimeSeries) -> "Standardizer":
        """
        Fit the statistics on the training split only.

        :param train: The training series.
        :return: The fitted standardizer.

        :raise DataError: If a dimension has zero variance.
        """
        u_std, y_std = train.u.std(axis=0), train.y.std(axis=0)
        for names, std in ((train.u_names, u_std), (train.y_names, y_std)):
            constant = [name for name, value in zip(names, std) if not value > 0]
            if constant:
                raise DataError(f"Cannot standardize zero-variance columns: {constant}")
        return cls(train.u.mean(axis=0), u_std, train.y.mean(axis=0), y_std)

    def apply_u(self, u: np.ndarray) -> np.ndarray:
        return (np.asarray(u, dtype=np.float64) - self.u_mean) / self.u_std

    def apply_y(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.y_mean) / self.y_std

    def invert_y(self, y: np.ndarray) -> np.ndarray:
        """
        Map standardized outputs back to original units; the last axis is the output dimension.
        """
        return np.asarray(y, dtype=np.float64) * self.y_std + self.y_mean

    def invert_u(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=np.float64) * self.u_std + self.u_mean

    def apply(self, series: TimeSeries) -> TimeSeries:
        return replace(series, u=self.apply_u(series.u), y=self.apply_y(series.y), standardizer=self)

    def invert(self, series: TimeSeries) -> TimeSeries:
        return replace(series, u=self.invert_u(series.u), y=self.invert_y(series.y), standardizer=None)

    def to_dict(self) -> dict[str, Any]:
        return {name: getattr(self, name).tolist() for name in ("u_mean", "u_std", "y_mean", "y_std")}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Standardizer":
        return cls(**{name: np.asarray(values, dtype=np.float64) for name, values in data.items()})


@dataclass
class ChunkSet:
    """
    J overlapping windows of length W cut from one series with stride 1.

    Attributes:
    - u (np.ndarray): J × W × d_u.
    - y (np.ndarray): J × W × d_y.
    - label (str): Originating split.
    """
    u: np.ndarray
    y: np.ndarray
    label: str = ""

    def __len__(self) -> int:
        return self.u.shape[0]

    @property
    def window(self) -> int:
        return self.u.shape[1]

    def batches(self, batch_size: int, rng: np.random.Generator | None = None) -> Iterator[np.ndarray]:
        """
        Yield index arrays covering every chunk once; shuffled when a generator is given.

        :param batch_size: Maximum batch size; the last batch may be smaller.
        :param rng: Optional generator for shuffling.
        """
        if batch_size < 1:
            raise ContractError(f"Batch size must be positive, got {batch_size}")
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for start in range(0, len(self), batch_size):
            yield order[start:start + batch_size]


def shingle(series: TimeSeries, window: int) -> ChunkSet:
    """
    Cut a series into J = T − W + 1 stride-1 chunks; row i of chunk j is series row j + i.

    :param series: The series.
    :param window: Chunk length W.
    :return: The chunk set.

    :raise DataError: If W exceeds the series length.
    """
    if window < 1:
        raise ContractError(f"Chunk size must be positive, got {window}")
    if window > series.length:
        raise DataError(f"Chunk size W={window} exceeds the {series.label or 'series'} length T={series.length}")
    u = sliding_window_view(series.u, window, axis=0).transpose(0, 2, 1)
    y = sliding_window_view(series.y, window, axis=0).transpose(0, 2, 1)
    return ChunkSet(u, y, series.label)


def _floor_length(fraction: float, length: int) -> int:
    return int(math.floor(fraction * length + FRACTION_TOLERANCE))


def check_fractions(fractions: Sequence[float]) -> tuple[float, float, float]:
    """
    Validate (train, valid, test) fractions: three positive numbers summing to 1 within 1e-9.

    :raise ConfigError: If the fractions are invalid.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(not f > 0 for f in fractions):
        raise ConfigError(f"Split fractions must be three positive numbers, got {fractions}")
    if abs(sum(fractions) - 1.0) > FRACTION_TOLERANCE:
        raise ConfigError(f"Split fractions must sum to 1, got {sum(fractions)!r}")
    return fractions


def _check_segment(segment: TimeSeries, window: int | None) -> None:
    if window is not None and segment.length < window:
        raise DataError(f"The {segment.label} segment has {segment.length} rows, fewer than W={window}")


def chrono_split(
        series: TimeSeries,
        fractions: Sequence[float],
        window: int | None = None,
) -> tuple[TimeSeries, TimeSeries, TimeSeries]:
    """
    Split a series into contiguous train, validation and test segments in time order.

    Train and validation get ⌊f·T⌋ rows, the test segment gets the remainder.

    :param series: The series.
    :param fractions: (f_train, f_valid, f_test).
    :param window: Chunk size the train and validation segments must accommodate.
    :return: The three segments.
    """
    f_train, f_valid, _ = check_fractions(fractions)
    n_train = _floor_length(f_train, series.length)
    n_valid = _floor_length(f_valid, series.length)

    train = series.segment(0, n_train, "train")
    valid = series.segment(n_train, n_train + n_valid, "valid")
    test = series.segment(n_train + n_valid, series.length, "test")
    for segment in (train, valid):
        _check_segment(segment, window)

    logger.info(f"Split {series.length} rows into {train.length}/{valid.length}/{test.length}")
    return train, valid, test


def split_train_valid(
        series: TimeSeries,
        train_fraction: float,
        window: int | None = None,
) -> tuple[TimeSeries, TimeSeries]:
    """
    Split a series into train and validation segments when the test data comes from elsewhere.

    :param series: The series.
    :param train_fraction: Share of rows in the training segment, in (0, 1).
    :param window: Chunk size both segments must accommodate.
    :return: The two segments.
    """
    if not 0 < train_fraction < 1:
        raise ConfigError(f"Train fraction must lie in (0, 1), got {train_fraction}")
    n_train = _floor_length(train_fraction, series.length)
    train = series.segment(0, n_train, "train")
    valid = series.segment(n_train, series.length, "valid")
    for segment in (train, valid):
        _check_segment(segment, window)
    return train, valid


def fit_standardizer(train: TimeSeries) -> Standardizer:
    """
    Fit standardization statistics on the training split; apply them to every split with Standardizer.apply.
    """
    return Standardizer.fit(train)
