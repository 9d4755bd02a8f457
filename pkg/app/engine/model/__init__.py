from .forecast import forecast
from .gaussian import gaussian_log_likelihood, hybrid_output, kl_unit_gaussian, reparameterize, split_gaussian
from .network import StepResult, Transforms, VRNNaug, unbiased_elbo
from .types import EncoderState, ForecastSamples, GaussianDiag, Mode, ModelConfig, Variant

__all__ = [
    "EncoderState",
    "ForecastSamples",
    "GaussianDiag",
    "Mode",
    "ModelConfig",
    "StepResult",
    "Transforms",
    "VRNNaug",
    "Variant",
    "forecast",
    "gaussian_log_likelihood",
    "hybrid_output",
    "kl_unit_gaussian",
    "reparameterize",
    "split_gaussian",
    "unbiased_elbo",
]
