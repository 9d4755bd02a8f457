import logging
from typing import Sequence

import numpy as np

from app.engine.autodiff import Tensor, no_grad
from app.engine.model.gaussian import reparameterize
from app.engine.model.network import VRNNaug
from app.engine.model.types import EncoderState, ForecastSamples, Mode
from app.engine.utils.exceptions import ContractError, DimensionError, MissingInputError
from app.engine.utils.rng import spawn_generators

logger = logging.getLogger(__name__)


def forecast(
        model: VRNNaug,
        u_future: np.ndarray,
        horizon: int,
        num_samples: int,
        seed: int = 0,
        warm_state: EncoderState | None = None,
        generators: Sequence[np.random.Generator] | None = None,
        noise_scale: float = 1.0,
        output_names: list[str] | None = None,
        start: int = 0,
) -> ForecastSamples:
    """
    Free forecasting by recursive Monte-Carlo rollout.

    Every trajectory owns an independent generator derived from the seed and runs on its own single-row state, so
    trajectory k is bit-identical whether it is rolled out alone or together with others. At each step a trajectory
    draws its latent noise, then its output noise.

    :param model: The trained model.
    :param u_future: Known input signals, (≥ horizon, d_u).
    :param horizon: Number of steps F.
    :param num_samples: Number of trajectories K.
    :param seed: Master seed for the per-trajectory generators.
    :param warm_state: Optional state with K rows, otherwise the rollout starts cold from zeros.
    :param generators: Explicit per-trajectory generators, overriding the seed.
    :param noise_scale: Multiplier on all noise; 0 gives the deterministic mean rollout.
    :param output_names: Names of the output dimensions.
    :param start: Time index of the first forecast step.
    :return: K × F × d_y samples.

    :raise MissingInputError: If u_future has fewer than horizon rows.
    """
    config = model.config
    if horizon < 1 or num_samples < 1:
        raise ContractError(f"Forecasting needs F >= 1 and K >= 1, got F={horizon}, K={num_samples}")

    u = np.asarray(u_future, dtype=np.float64)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[0] < horizon:
        raise MissingInputError(
            f"Input signals cover {u.shape[0]} steps but the horizon is {horizon}: "
            f"{horizon - u.shape[0]} steps are missing"
        )
    if u.shape[1] != config.input_dim:
        raise DimensionError(f"Input signal width {u.shape[1]} != d_u = {config.input_dim}")

    generators = list(generators) if generators is not None else spawn_generators(seed, num_samples)
    if len(generators) != num_samples:
        raise ContractError(f"{len(generators)} generators for {num_samples} trajectories")

    state = warm_state if warm_state is not None else model.initial_state(num_samples)
    if state.batch != num_samples:
        raise ContractError(f"Warm state has {state.batch} rows, expected {num_samples}")

    samples = np.empty((num_samples, horizon, config.output_dim))
    with no_grad():
        for k, generator in enumerate(generators):
            samples[k] = _rollout(model, u[:horizon], state.row(k), generator, noise_scale)

    logger.info(f"Forecast {num_samples} trajectories over {horizon} steps")
    names = output_names or [f"y{i + 1}" for i in range(config.output_dim)]
    return ForecastSamples(samples, names, start=start, seed=seed)


def _rollout(
        model: VRNNaug,
        u: np.ndarray,
        state: EncoderState,
        generator: np.random.Generator,
        noise_scale: float,
) -> np.ndarray:
    # One trajectory on a single-row state; ε_z before ε_y at every step
    config = model.config
    path = np.empty((u.shape[0], config.output_dim))
    for t in range(u.shape[0]):
        eps_z = noise_scale * generator.standard_normal((1, config.latent_dim))
        eps_y = noise_scale * generator.standard_normal((1, config.output_dim))

        result = model.step(state, Tensor(u[t][None]), Mode.PREDICT, Tensor(eps_z))
        y_hat = reparameterize(result.decoder, Tensor(eps_y))
        path[t] = y_hat.values[0]
        state = model.advance(state, result, y_hat, y_hat)
    return path
