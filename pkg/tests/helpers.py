import numpy as np

from app.engine.autodiff import Tensor
from app.engine.model import VRNNaug


def numeric_grad(f, values: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """
    Central finite differences of a scalar function of an array.
    """
    values = np.array(values, dtype=np.float64)
    grad = np.zeros_like(values)
    for index in np.ndindex(values.shape):
        original = values[index]
        values[index] = original + step
        upper = f(values.copy())
        values[index] = original - step
        lower = f(values.copy())
        values[index] = original
        grad[index] = (upper - lower) / (2 * step)
    return grad


def leaf(values, name: str = "x") -> Tensor:
    return Tensor(values, requires_grad=True, name=name)


def zero_params(model: VRNNaug) -> None:
    for _, param in model.params.items():
        param.values = np.zeros_like(param.values)
