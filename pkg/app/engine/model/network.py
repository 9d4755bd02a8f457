import logging
from dataclasses import dataclass

import numpy as np

from app.engine.autodiff import Tensor, concat, no_grad, scale, sum_
from app.engine.model.gaussian import (
    gaussian_log_likelihood,
    hybrid_output,
    kl_unit_gaussian,
    reparameterize,
    split_gaussian,
)
from app.engine.model.types import EncoderState, GaussianDiag, Mode, ModelConfig, Variant
from app.engine.nn import GruParams, MlpParams, ParamStore, gru_step, mlp_forward
from app.engine.utils.exceptions import ContractError, DimensionError, NumericError

logger = logging.getLogger(__name__)


@dataclass
class Transforms:
    """
    Recurrent summaries z̄_{t-1}, ū_t, ȳ_{t-1} and the GRU states that produced them.
    """
    z_bar: Tensor
    u_bar: Tensor
    y_bar: Tensor
    h_z: Tensor | None
    h_u: Tensor | None
    h_y: Tensor


@dataclass
class StepResult:
    transforms: Transforms
    posterior: GaussianDiag
    z: Tensor
    decoder: GaussianDiag


class VRNNaug:
    """
    Variational recurrent state-space model on an augmented recurrent input space.

    The inference network summarizes the histories of latents, inputs and (hybrid) outputs with three GRU streams,
    parameterizes q(z_t|·) from the summaries and decodes p(y_t|·) from the latent sample densely connected to every
    summary. Prediction reuses the same networks, feeding the model's own output samples to the y-stream.
    """

    def __init__(self, config: ModelConfig, seed: int = 0) -> None:
        """
        Build and initialize all networks.

        :param config: The model configuration.
        :param seed: Seed of the parameter initialization.
        """
        self.config = config
        self.params = ParamStore()
        rng = np.random.default_rng(seed)

        d_u, d_y, d_z, hidden = config.input_dim, config.output_dim, config.latent_dim, config.hidden_size
        mlp_kwargs = dict(rng=rng, min_width=config.mlp_min_width)

        self.gru_z: GruParams | None = None
        self.gru_u: GruParams | None = None
        self.mlp_z_bar: MlpParams | None = None
        self.mlp_u_bar: MlpParams | None = None
        if config.variant != Variant.V1:
            self.gru_z = GruParams.create(self.params, "gru_z", d_z, hidden, rng)
            self.gru_u = GruParams.create(self.params, "gru_u", d_u, hidden, rng)
            self.mlp_z_bar = MlpParams.create(self.params, "mlp_z_bar", hidden, d_z, **mlp_kwargs)
            self.mlp_u_bar = MlpParams.create(self.params, "mlp_u_bar", hidden, d_u, **mlp_kwargs)
        self.gru_y = GruParams.create(self.params, "gru_y", d_y, hidden, rng)
        self.mlp_y_bar = MlpParams.create(self.params, "mlp_y_bar", hidden, d_y, **mlp_kwargs)
        self.mlp_z = MlpParams.create(self.params, "mlp_z", d_z + d_u + d_y, 2 * d_z, **mlp_kwargs)
        self.mlp_y = MlpParams.create(self.params, "mlp_y", 2 * d_z + 2 * d_u + d_y, 2 * d_y, **mlp_kwargs)

        logger.debug(f"Built {config.variant.value} model with {self.params.size} parameters")

    def initial_state(self, batch: int) -> EncoderState:
        return EncoderState.zeros(self.config, batch)

    def y_stream_input(self, state: EncoderState, mode: Mode) -> Tensor:
        """
        Select what the y-stream GRU consumes at this step.

        Prediction always feeds the previous sample ŷ_{t-1}. Training feeds the hybrid ẏ_{t-1} for the full model and
        the observation y_{t-1} for both ablations.
        """
        if mode == Mode.PREDICT:
            return state.y_hat_prev
        if self.config.variant == Variant.FULL:
            return hybrid_output(state.y_prev, state.y_hat_prev, detach=not self.config.hybrid_gradient)
        return state.y_prev

    def recurrent_transforms(self, state: EncoderState | None, u_t: Tensor, mode: Mode) -> Transforms:
        """
        Advance the three GRU streams and map their states to z̄_{t-1}, ū_t and ȳ_{t-1}.

        :param state: State after step t-1.
        :param u_t: Input signal at step t, (batch, d_u).
        :param mode: Train or predict.
        :return: The recurrent summaries and new GRU states.
        """
        if state is None:
            raise ContractError("recurrent_transforms needs an initialized encoder state")
        if u_t.shape[-1] != self.config.input_dim:
            raise DimensionError(f"Input signal width {u_t.shape[-1]} != d_u = {self.config.input_dim}")

        if self.config.variant == Variant.V1:
            z_bar, h_z = state.z_prev, None
            u_bar, h_u = u_t, None
        else:
            h_z = gru_step(self.gru_z, state.h_z, state.z_prev)
            z_bar = mlp_forward(self.mlp_z_bar, h_z)
            h_u = gru_step(self.gru_u, state.h_u, u_t)
            u_bar = mlp_forward(self.mlp_u_bar, h_u)

        h_y = gru_step(self.gru_y, state.h_y, self.y_stream_input(state, mode))
        y_bar = mlp_forward(self.mlp_y_bar, h_y)
        return Transforms(z_bar, u_bar, y_bar, h_z, h_u, h_y)

    def posterior_params(self, z_bar: Tensor, u_bar: Tensor, y_bar: Tensor) -> GaussianDiag:
        """
        [μ_z, log ν_z] = MLP^z(z̄_{t-1}, ū_t, ȳ_{t-1}).
        """
        self._check_widths(z_bar=z_bar, u_bar=u_bar, y_bar=y_bar)
        raw = mlp_forward(self.mlp_z, concat(z_bar, u_bar, y_bar))
        return split_gaussian(raw, self.config.latent_dim, self.config.logvar_min, self.config.logvar_max)

    def decoder_params(self, z: Tensor, u_t: Tensor, z_bar: Tensor, u_bar: Tensor, y_bar: Tensor) -> GaussianDiag:
        """
        [μ_y, log ν_y] = MLP^y(z_t, u_t, z̄_{t-1}, ū_t, ȳ_{t-1}), the dense connection to the decoder.
        """
        self._check_widths(z=z, u_t=u_t, z_bar=z_bar, u_bar=u_bar, y_bar=y_bar)
        raw = mlp_forward(self.mlp_y, concat(z, u_t, z_bar, u_bar, y_bar))
        return split_gaussian(raw, self.config.output_dim, self.config.logvar_min, self.config.logvar_max)

    def step(self, state: EncoderState, u_t: Tensor, mode: Mode, eps_z: Tensor) -> StepResult:
        """
        One time step: transforms, posterior, latent sample and decoder parameters.

        :param state: State after step t-1.
        :param u_t: Input signal at step t.
        :param mode: Train or predict.
        :param eps_z: Standard-normal noise for the latent sample, (batch, d_z).
        :return: Everything computed at this step.
        """
        transforms = self.recurrent_transforms(state, u_t, mode)
        posterior = self.posterior_params(transforms.z_bar, transforms.u_bar, transforms.y_bar)
        z = reparameterize(posterior, eps_z)
        decoder = self.decoder_params(z, u_t, transforms.z_bar, transforms.u_bar, transforms.y_bar)
        return StepResult(transforms, posterior, z, decoder)

    @staticmethod
    def advance(state: EncoderState, result: StepResult, y_t: Tensor, y_hat: Tensor) -> EncoderState:
        """
        Build the state for step t+1.

        :param state: State after step t-1.
        :param result: Result of step t.
        :param y_t: Observation at step t (the sample itself when predicting).
        :param y_hat: Output sample ŷ_t.
        :return: The new state.
        """
        transforms = result.transforms
        return EncoderState(
            h_z=transforms.h_z,
            h_u=transforms.h_u,
            h_y=transforms.h_y,
            z_prev=result.z,
            y_prev=y_t,
            y_hat_prev=y_hat,
        )

    def elbo_terms(self, u: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> list[tuple[Tensor, Tensor]]:
        """
        Per-step single-sample ELBO terms over a batch of chunks.

        At each step ε_z is drawn before ε_y, both as (batch, width) blocks from rng.

        :param u: Inputs, (batch, W, d_u) or (W, d_u).
        :param y: Observations, (batch, W, d_y) or (W, d_y).
        :param rng: Source of the reparameterization noise.
        :return: List of (log-likelihood, KL) pairs, each of shape (batch,).

        :raise NumericError: If a non-finite value appears, naming the time step.
        """
        u, y = self._as_batch(u, y)
        batch, window = u.shape[0], u.shape[1]
        d_z, d_y = self.config.latent_dim, self.config.output_dim

        state = self.initial_state(batch)
        terms = []
        for t in range(window):
            try:
                u_t, y_t = Tensor(u[:, t]), Tensor(y[:, t])
                eps_z = Tensor(rng.standard_normal((batch, d_z)))
                eps_y = Tensor(rng.standard_normal((batch, d_y)))

                result = self.step(state, u_t, Mode.TRAIN, eps_z)
                loglik = gaussian_log_likelihood(y_t, result.decoder)
                kl = kl_unit_gaussian(result.posterior)
                terms.append((loglik, kl))

                # ŷ_t for the next step's hybrid input
                y_hat = reparameterize(result.decoder, eps_y)
                if not self.config.hybrid_gradient:
                    y_hat = y_hat.detach()
                state = self.advance(state, result, y_t, y_hat)
            except NumericError as error:
                raise NumericError(f"Non-finite value at time step {t + 1}: {error}") from error
        return terms

    def elbo_batch(self, u: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> Tensor:
        """
        Single-sample ELBO of every chunk in a batch.

        :return: Tensor of shape (batch,).
        """
        total = None
        for loglik, kl in self.elbo_terms(u, y, rng):
            term = loglik - kl
            total = term if total is None else total + term
        return total

    def elbo_chunk(self, u: np.ndarray, y: np.ndarray, rng: np.random.Generator) -> Tensor:
        """
        Single-sample ELBO Σ_t E_q[log p(y_t|·)] − KL_t of one chunk.

        :param u: Inputs, (W, d_u).
        :param y: Observations, (W, d_y).
        :param rng: Source of the reparameterization noise.
        :return: Scalar tensor.
        """
        if np.ndim(u) != 2 or np.ndim(y) != 2:
            raise DimensionError("elbo_chunk expects one chunk: u (W, d_u) and y (W, d_y)")
        return sum_(self.elbo_batch(u, y, rng))

    @no_grad()
    def warm_state(self, u: np.ndarray, y: np.ndarray, count: int, rng: np.random.Generator) -> EncoderState:
        """
        Filter a conditioning history in train mode and return its final state for count trajectories.

        The last observation seeds the prediction-mode y-stream.

        :param u: History inputs, (T, d_u).
        :param y: History observations, (T, d_y).
        :param count: Number of trajectories K.
        :param rng: Source of the filtering noise.
        :return: A state with count identical rows.
        """
        u, y = self._as_batch(u, y)
        if u.shape[0] != 1:
            raise DimensionError("warm_state filters a single history")
        state = self.initial_state(1)
        for t in range(u.shape[1]):
            u_t, y_t = Tensor(u[:, t]), Tensor(y[:, t])
            eps_z = Tensor(rng.standard_normal((1, self.config.latent_dim)))
            eps_y = Tensor(rng.standard_normal((1, self.config.output_dim)))
            result = self.step(state, u_t, Mode.TRAIN, eps_z)
            state = self.advance(state, result, y_t, reparameterize(result.decoder, eps_y))
        state.y_hat_prev = state.y_prev
        return state.repeat(count)

    def _as_batch(self, u: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u = np.asarray(u, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if u.ndim == 2 and y.ndim == 2:
            u, y = u[None], y[None]
        if u.ndim != 3 or y.ndim != 3 or u.shape[:2] != y.shape[:2]:
            raise DimensionError(f"Chunk shapes do not conform: u {u.shape}, y {y.shape}")
        if u.shape[1] < 1:
            raise ContractError("Chunks need at least one time step")
        if u.shape[2] != self.config.input_dim or y.shape[2] != self.config.output_dim:
            raise DimensionError(
                f"Chunk widths u {u.shape[2]}, y {y.shape[2]} != "
                f"d_u = {self.config.input_dim}, d_y = {self.config.output_dim}"
            )
        return u, y

    def _check_widths(self, **tensors: Tensor) -> None:
        expected = {
            "z": self.config.latent_dim,
            "z_bar": self.config.latent_dim,
            "u_t": self.config.input_dim,
            "u_bar": self.config.input_dim,
            "y_bar": self.config.output_dim,
        }
        for name, tensor in tensors.items():
            if tensor.shape[-1] != expected[name]:
                raise DimensionError(f"{name} has width {tensor.shape[-1]}, expected {expected[name]}")


def unbiased_elbo(chunk_elbos: Tensor, total_chunks: int) -> Tensor:
    """
    Mini-batch estimate L̃ = (J / |B|) Σ_{j ∈ B} L^j of the full-data ELBO.

    :param chunk_elbos: Per-chunk ELBOs of the batch, shape (|B|,).
    :param total_chunks: J, the number of chunks in the whole set.
    :return: Scalar tensor.
    """
    if chunk_elbos.ndim != 1 or chunk_elbos.shape[0] == 0:
        raise ContractError("unbiased_elbo needs a non-empty batch of chunk ELBOs")
    batch = chunk_elbos.shape[0]
    if total_chunks < batch:
        raise ContractError(f"J = {total_chunks} is smaller than the batch size {batch}")
    return scale(sum_(chunk_elbos), total_chunks / batch)
