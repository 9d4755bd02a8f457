import math

from app.engine.autodiff import Tensor, clip, exp, mul, scale, shift, slice_last, square, sub, sum_
from app.engine.model.types import GaussianDiag
from app.engine.utils.exceptions import DimensionError

LOG_2PI = math.log(2.0 * math.pi)


def split_gaussian(raw: Tensor, width: int, logvar_min: float, logvar_max: float) -> GaussianDiag:
    """
    Split raw network output [μ, log ν] into a GaussianDiag with a clamped log-variance.

    :param raw: Output of width 2·width (last axis).
    :param width: Width of the distribution.
    :param logvar_min: Lower clamp bound.
    :param logvar_max: Upper clamp bound.
    :return: The Gaussian parameters.
    """
    if raw.shape[-1] != 2 * width:
        raise DimensionError(f"Expected {2 * width} raw outputs, got {raw.shape[-1]}")
    mean = slice_last(raw, 0, width)
    log_var = clip(slice_last(raw, width, 2 * width), logvar_min, logvar_max)
    return GaussianDiag(mean, log_var)


def reparameterize(g: GaussianDiag, eps: Tensor) -> Tensor:
    """
    Draw μ + exp(½ log ν)∘ε, differentiable in μ and log ν.

    :param g: The Gaussian.
    :param eps: Standard-normal noise of the same shape.
    :return: The sample.
    """
    if eps.shape != g.mean.shape:
        raise DimensionError(f"reparameterize: noise {eps.shape} != mean {g.mean.shape}")
    return g.mean + mul(exp(scale(g.log_var, 0.5)), eps)


def kl_unit_gaussian(g: GaussianDiag) -> Tensor:
    """
    KL(N(μ, diag ν) || N(0, I)) = ½ Σ_i [ν_i + μ_i² − 1 − log ν_i], summed over the last axis.
    """
    elementwise = shift(sub(exp(g.log_var) + square(g.mean), g.log_var), -1.0)
    return scale(sum_(elementwise, axis=-1), 0.5)


def gaussian_log_likelihood(y: Tensor, g: GaussianDiag) -> Tensor:
    """
    Σ_i [−½ log 2π − ½ log ν_i − (y_i − μ_i)² / (2 ν_i)], summed over the last axis.
    """
    if y.shape != g.mean.shape:
        raise DimensionError(f"log-likelihood: observation {y.shape} != mean {g.mean.shape}")
    mahalanobis = mul(square(sub(y, g.mean)), exp(scale(g.log_var, -1.0)))
    return scale(sum_(shift(g.log_var + mahalanobis, LOG_2PI), axis=-1), -0.5)


def hybrid_output(y_prev: Tensor, y_hat_prev: Tensor, detach: bool = True) -> Tensor:
    """
    Lagged hybrid ẏ_{t-1} = ½(y_{t-1} + ŷ_{t-1}) used as the training-time y-stream input.

    :param y_prev: Previous observation.
    :param y_hat_prev: Previous output sample.
    :param detach: Stop gradients through the sample.
    :return: The hybrid output.
    """
    if y_prev.shape != y_hat_prev.shape:
        raise DimensionError(f"hybrid_output: {y_prev.shape} != {y_hat_prev.shape}")
    sample = y_hat_prev.detach() if detach else y_hat_prev
    return scale(y_prev + sample, 0.5)
