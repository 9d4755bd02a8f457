import numpy as np

from app.engine.utils.exceptions import ContractError


def _check_extents(rows: int, cols: int) -> None:
    if rows < 1 or cols < 1:
        raise ContractError(f"Matrix extents must be positive, got ({rows}, {cols})")


def orthogonal_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw an orthogonal matrix from the QR decomposition of a standard-normal matrix.

    The diagonal of R is used to fix the sign of each column, which makes the draw uniform over the orthogonal group.
    For rows >= cols the columns are orthonormal, otherwise the rows are.

    :param rows: Number of rows.
    :param cols: Number of columns.
    :param rng: Seeded generator.
    :return: Array of shape (rows, cols).
    """
    _check_extents(rows, cols)
    gaussian = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(gaussian)
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    q = q * signs
    return q if rows >= cols else np.ascontiguousarray(q.T)


def glorot_uniform(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw weights uniformly in ±sqrt(6 / (fan_in + fan_out)).

    :param rows: Number of rows (fan-out).
    :param cols: Number of columns (fan-in).
    :param rng: Seeded generator.
    :return: Array of shape (rows, cols).
    """
    _check_extents(rows, cols)
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))
