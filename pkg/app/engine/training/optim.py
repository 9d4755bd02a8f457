import logging
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from app.engine.nn import ParamStore
from app.engine.utils.exceptions import ContractError, NumericError

logger = logging.getLogger(__name__)


@dataclass
class OptimState:
    """
    Adam moment buffers, step counter and current learning rate.

    Attributes:
    - lr (float): Current learning rate.
    - beta1, beta2, eps (float): Adam constants.
    - step (int): Number of updates applied.
    - m, v (dict[str, np.ndarray]): First and second moments, shaped like their parameters.
    """
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.lr > 0:
            raise ContractError(f"Learning rate must be positive, got {self.lr}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "step": self.step,
            "m": {name: values.tolist() for name, values in self.m.items()},
            "v": {name: values.tolist() for name, values in self.v.items()},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "OptimState":
        moments = {key: {name: np.asarray(values, dtype=np.float64) for name, values in data[key].items()}
                   for key in ("m", "v")}
        scalars = {key: value for key, value in data.items() if key not in ("m", "v")}
        return cls(**scalars, **moments)


def _collect_grads(params: ParamStore, grads: Mapping[str, np.ndarray] | None) -> dict[str, np.ndarray]:
    collected = {}
    for name, param in params.items():
        grad = param.grad if grads is None else grads.get(name)
        if grad is None:
            raise ContractError(f"No gradient for parameter {name!r}")
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != param.shape:
            raise ContractError(f"Gradient of {name!r} has shape {grad.shape}, expected {param.shape}")
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"Non-finite gradient for parameter {name!r}")
        collected[name] = grad
    return collected


def adam_step(params: ParamStore, state: OptimState, grads: Mapping[str, np.ndarray] | None = None) -> None:
    """
    Apply one bias-corrected Adam update to every parameter in place.

    All gradients are checked before any parameter changes.

    :param params: The parameters, updated in place.
    :param state: The optimizer state, updated in place.
    :param grads: Explicit gradients by name, otherwise the parameters' accumulated .grad.

    :raise ContractError: If a parameter has no gradient.
    :raise NumericError: If a gradient is not finite, naming the parameter.
    """
    collected = _collect_grads(params, grads)
    state.step += 1
    correction1 = 1 - state.beta1 ** state.step
    correction2 = 1 - state.beta2 ** state.step

    for name, param in params.items():
        grad = collected[name]
        m = state.m.get(name, np.zeros_like(grad))
        v = state.v.get(name, np.zeros_like(grad))
        m = state.beta1 * m + (1 - state.beta1) * grad
        v = state.beta2 * v + (1 - state.beta2) * grad ** 2
        state.m[name], state.v[name] = m, v
        param.values = param.values - state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)


def clip_grad_norm(params: ParamStore, max_norm: float) -> float:
    """
    Rescale all gradients so that their joint L2 norm does not exceed max_norm.

    :param params: Parameters with accumulated gradients.
    :param max_norm: Norm bound.
    :return: The norm before clipping.
    """
    if not max_norm > 0:
        raise ContractError(f"max_norm must be positive, got {max_norm}")
    grads = [param.grad for _, param in params.items() if param.grad is not None]
    norm = float(np.sqrt(sum(np.sum(grad ** 2) for grad in grads)))
    if not np.isfinite(norm):
        raise NumericError("Non-finite gradient norm")
    if norm > max_norm:
        logger.warning(f"Clipping gradient norm {norm:.4g} to {max_norm}")
        factor = max_norm / norm
        for _, param in params.items():
            if param.grad is not None:
                param.grad = param.grad * factor
    return norm
