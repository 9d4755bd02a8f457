import logging
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from app.engine.data.series import TimeSeries
from app.engine.utils.exceptions import DataError

logger = logging.getLogger(__name__)

TIME_COLUMN = "t"


def _read_frame(path: Path, header: int | None) -> pd.DataFrame:
    if not path.is_file():
        raise DataError(f"Dataset file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, header=header, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: the file is empty")
    except pd.errors.ParserError as ex:
        raise DataError(f"{path}: malformed CSV: {ex}")
    if frame.empty:
        raise DataError(f"{path}: the file has no data rows")
    return frame


def _numeric_column(frame: pd.DataFrame, column: str | int, path: Path, first_line: int) -> np.ndarray:
    """
    Convert one text column to floats, reporting the first offending cell.

    :param first_line: File line number of the first data row.
    """
    text = frame[column].str.strip()
    blank = np.flatnonzero((text == "").to_numpy())
    if blank.size:
        raise DataError(f"{path}: missing value in column {column!r} at line {blank[0] + first_line}")
    values = pd.to_numeric(text, errors="coerce").to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        row = bad[0]
        raise DataError(
            f"{path}: non-numeric value {text.iloc[row]!r} in column {column!r} at line {row + first_line}"
        )
    return values


def load_csv(
        path: str | Path,
        u_columns: Sequence[str],
        y_columns: Sequence[str],
        label: str | None = None,
) -> TimeSeries:
    """
    Load a CSV with a header row into a TimeSeries, selecting columns by name.

    Rows are taken in file order and assumed evenly spaced in time. When no input columns are given, the row index
    becomes the single input signal "t".

    :param path: The CSV path.
    :param u_columns: Names of the input-signal columns.
    :param y_columns: Names of the observation columns.
    :param label: Provenance label, the file stem by default.
    :return: The series.

    :raise DataError: On a missing file or column, a blank or non-numeric cell, or an empty file.
    """
    path = Path(path)
    if not y_columns:
        raise DataError("At least one output column is required")
    frame = _read_frame(path, header=0)
    frame.columns = [str(column).strip() for column in frame.columns]

    missing = [column for column in [*u_columns, *y_columns] if column not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}; available: {list(frame.columns)}")

    # Header is line 1, so the first data row is line 2
    y = np.column_stack([_numeric_column(frame, column, path, 2) for column in y_columns])
    if u_columns:
        u = np.column_stack([_numeric_column(frame, column, path, 2) for column in u_columns])
        u_names = list(u_columns)
    else:
        u = np.arange(len(frame), dtype=np.float64)[:, None]
        u_names = [TIME_COLUMN]

    series = TimeSeries(u, y, u_names, list(y_columns), label or path.stem)
    logger.info(f"Loaded {path}: T={series.length}, d_u={series.input_dim}, d_y={series.output_dim}")
    return series


def load_motorcycle(path: str | Path) -> TimeSeries:
    """
    Load the two-column motorcycle data (time in ms, acceleration), with or without a header row.

    Time is the input signal. Repeated time stamps are expected, so no ordering check is made.

    :param path: The file path.
    :return: The series with d_u = d_y = 1.
    """
    path = Path(path)
    frame = _read_frame(path, header=None)
    if frame.shape[1] != 2:
        raise DataError(f"{path}: expected 2 columns (time, acceleration), found {frame.shape[1]}")

    first_line = 1
    if pd.to_numeric(frame.iloc[0].str.strip(), errors="coerce").isna().any():
        frame = frame.iloc[1:].reset_index(drop=True)
        first_line = 2
        if frame.empty:
            raise DataError(f"{path}: the file has no data rows")

    time = _numeric_column(frame, 0, path, first_line)
    accel = _numeric_column(frame, 1, path, first_line)
    series = TimeSeries(time[:, None], accel[:, None], ["time"], ["accel"], "motorcycle")
    logger.info(f"Loaded motorcycle data: T={series.length}")
    return series


def write_csv(series: TimeSeries, path: str | Path) -> Path:
    """
    Write a series in the common CSV schema: header row, input columns, then output columns.

    :param series: The series.
    :param path: Destination path.
    :return: The path written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(np.hstack([series.u, series.y]), columns=[*series.u_names, *series.y_names])
    frame.to_csv(path, index=False)
    return path


def load_columns(path: str | Path, columns: Sequence[str]) -> np.ndarray:
    """
    Load named numeric columns from a CSV with a header row.

    :param path: The CSV path.
    :param columns: Column names, in the order wanted.
    :return: Matrix rows × len(columns).
    """
    path = Path(path)
    frame = _read_frame(path, header=0)
    frame.columns = [str(column).strip() for column in frame.columns]
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}; available: {list(frame.columns)}")
    return np.column_stack([_numeric_column(frame, column, path, 2) for column in columns])
