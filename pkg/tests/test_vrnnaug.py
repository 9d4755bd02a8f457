import itertools
import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.engine.autodiff import Tensor, backward
from app.engine.model import EncoderState, Mode, ModelConfig, Variant, VRNNaug, unbiased_elbo
from app.engine.model.gaussian import gaussian_log_likelihood, kl_unit_gaussian, reparameterize
from app.engine.utils.exceptions import ContractError, DimensionError, NumericError
from tests.helpers import zero_params


def tiny(variant: Variant = Variant.FULL, **overrides) -> ModelConfig:
    settings = dict(input_dim=1, output_dim=1, latent_dim=2, hidden_size=3, mlp_min_width=3, variant=variant)
    return ModelConfig(**{**settings, **overrides})


def chunk(rng, window: int = 4, d_u: int = 1, d_y: int = 1) -> tuple[np.ndarray, np.ndarray]:
    return rng.normal(size=(window, d_u)), rng.normal(size=(window, d_y))


class TestLayout:
    def test_full_networks(self):
        model = VRNNaug(tiny())
        prefixes = {name.split(".")[0] for name in model.params}
        assert prefixes == {"gru_z", "gru_u", "gru_y", "mlp_z_bar", "mlp_u_bar", "mlp_y_bar", "mlp_z", "mlp_y"}

    def test_v1_bypasses_latent_and_input_streams(self):
        model = VRNNaug(tiny(Variant.V1))
        prefixes = {name.split(".")[0] for name in model.params}
        assert prefixes == {"gru_y", "mlp_y_bar", "mlp_z", "mlp_y"}

    def test_output_widths(self):
        model = VRNNaug(ModelConfig(input_dim=3, output_dim=2, latent_dim=10, hidden_size=4, mlp_min_width=4))
        assert model.mlp_z.in_width == 10 + 3 + 2
        assert model.mlp_z.out_width == 20
        assert model.mlp_y.in_width == 2 * 10 + 2 * 3 + 2
        assert model.mlp_y.out_width == 4

    def test_same_seed_same_parameters(self):
        first, second = VRNNaug(tiny(), seed=3), VRNNaug(tiny(), seed=3)
        assert all(np.array_equal(first.params[name].values, second.params[name].values) for name in first.params)

    def test_clamp_bounds_validated(self):
        with pytest.raises(ValidationError):
            tiny(logvar_min=1.0, logvar_max=0.0)


class TestStep:
    def test_zero_params_give_zero_transforms(self):
        model = VRNNaug(tiny())
        zero_params(model)
        transforms = model.recurrent_transforms(model.initial_state(1), Tensor([[0.7]]), Mode.TRAIN)
        for value in (transforms.z_bar, transforms.u_bar, transforms.y_bar):
            np.testing.assert_array_equal(value.values, np.zeros(value.shape))

    def test_zero_params_give_unit_gaussians(self):
        model = VRNNaug(tiny())
        zero_params(model)
        result = model.step(model.initial_state(1), Tensor([[0.7]]), Mode.TRAIN, Tensor(np.zeros((1, 2))))
        for g in (result.posterior, result.decoder):
            np.testing.assert_array_equal(g.mean.values, np.zeros(g.mean.shape))
            np.testing.assert_array_equal(g.log_var.values, np.zeros(g.log_var.shape))

    def test_modes_agree_at_cold_start(self, rng):
        model = VRNNaug(tiny(), seed=1)
        u_t = Tensor(rng.normal(size=(1, 1)))
        train = model.recurrent_transforms(model.initial_state(1), u_t, Mode.TRAIN)
        predict = model.recurrent_transforms(model.initial_state(1), u_t, Mode.PREDICT)
        for a, b in ((train.z_bar, predict.z_bar), (train.u_bar, predict.u_bar), (train.y_bar, predict.y_bar)):
            np.testing.assert_array_equal(a.values, b.values)

    def test_modes_agree_on_identical_y_stream_input(self, rng):
        # With y_{t-1} = ŷ_{t-1} the hybrid collapses to the sample, so both modes see the same input
        model = VRNNaug(tiny(), seed=2)
        state = model.initial_state(1)
        same = Tensor(rng.normal(size=(1, 1)))
        state.y_prev, state.y_hat_prev = same, same
        u_t, eps = Tensor(rng.normal(size=(1, 1))), Tensor(rng.normal(size=(1, 2)))
        train = model.step(state, u_t, Mode.TRAIN, eps)
        predict = model.step(state, u_t, Mode.PREDICT, eps)
        np.testing.assert_allclose(train.decoder.mean.values, predict.decoder.mean.values, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("variant, expected", [
        (Variant.FULL, 2.0),
        (Variant.V2, 1.0),
        (Variant.V1, 1.0),
    ])
    def test_training_y_stream_input(self, variant, expected):
        model = VRNNaug(tiny(variant))
        state = model.initial_state(1)
        state.y_prev, state.y_hat_prev = Tensor([[1.0]]), Tensor([[3.0]])
        assert model.y_stream_input(state, Mode.TRAIN).values[0, 0] == expected
        assert model.y_stream_input(state, Mode.PREDICT).values[0, 0] == 3.0

    def test_v1_passes_latent_and_input_through(self, rng):
        model = VRNNaug(tiny(Variant.V1), seed=4)
        state = model.initial_state(1)
        state.z_prev = Tensor(rng.normal(size=(1, 2)))
        u_t = Tensor([[0.25]])
        transforms = model.recurrent_transforms(state, u_t, Mode.TRAIN)
        assert transforms.z_bar is state.z_prev and transforms.u_bar is u_t
        assert transforms.h_z is None and transforms.h_u is None

    def test_two_step_rollout_by_hand(self, rng):
        model = VRNNaug(tiny(), seed=5)
        u, y = chunk(rng, window=2)
        value = model.elbo_chunk(u, y, np.random.default_rng(9)).item()

        noise = np.random.default_rng(9)
        state, expected = model.initial_state(1), 0.0
        for t in range(2):
            eps_z, eps_y = Tensor(noise.standard_normal((1, 2))), Tensor(noise.standard_normal((1, 1)))
            result = model.step(state, Tensor(u[None, t]), Mode.TRAIN, eps_z)
            y_t = Tensor(y[None, t])
            term = gaussian_log_likelihood(y_t, result.decoder) - kl_unit_gaussian(result.posterior)
            expected += float(term.values.sum())
            state = model.advance(state, result, y_t, reparameterize(result.decoder, eps_y).detach())
        assert value == pytest.approx(expected, rel=1e-12)

    def test_uninitialized_state(self):
        with pytest.raises(ContractError):
            VRNNaug(tiny()).recurrent_transforms(None, Tensor([[0.0]]), Mode.TRAIN)

    def test_input_width_mismatch(self):
        model = VRNNaug(tiny())
        with pytest.raises(DimensionError):
            model.recurrent_transforms(model.initial_state(1), Tensor([[0.0, 1.0]]), Mode.TRAIN)

    def test_posterior_width_mismatch(self):
        model = VRNNaug(tiny())
        with pytest.raises(DimensionError):
            model.posterior_params(Tensor([[0.0]]), Tensor([[0.0]]), Tensor([[0.0]]))


class TestElbo:
    def test_single_step_zero_params(self):
        model = VRNNaug(tiny(latent_dim=1))
        zero_params(model)
        value = model.elbo_chunk(np.zeros((1, 1)), np.zeros((1, 1)), np.random.default_rng(0)).item()
        assert value == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)

    def test_decomposes_into_step_terms(self, rng):
        model = VRNNaug(tiny(), seed=1)
        u, y = chunk(rng, window=5)
        terms = model.elbo_terms(u, y, np.random.default_rng(3))
        expected = sum(float(loglik.values.sum() - kl.values.sum()) for loglik, kl in terms)
        value = model.elbo_chunk(u, y, np.random.default_rng(3)).item()
        assert len(terms) == 5
        assert value == pytest.approx(expected, rel=1e-12)

    def test_deterministic_given_seed(self, rng):
        model = VRNNaug(tiny(), seed=1)
        u, y = chunk(rng)
        first = model.elbo_chunk(u, y, np.random.default_rng(11)).item()
        second = model.elbo_chunk(u, y, np.random.default_rng(11)).item()
        assert first == second

    def test_batch_shape(self, rng):
        model = VRNNaug(tiny(), seed=1)
        u, y = rng.normal(size=(3, 4, 1)), rng.normal(size=(3, 4, 1))
        assert model.elbo_batch(u, y, np.random.default_rng(0)).shape == (3,)

    def test_single_chunk_batch_matches_chunk(self, rng):
        model = VRNNaug(tiny(), seed=1)
        u, y = chunk(rng)
        batched = model.elbo_batch(u[None], y[None], np.random.default_rng(4)).values[0]
        assert batched == model.elbo_chunk(u, y, np.random.default_rng(4)).item()

    def test_shape_errors(self):
        model = VRNNaug(tiny())
        with pytest.raises(DimensionError):
            model.elbo_chunk(np.zeros((3, 1)), np.zeros((4, 1)), np.random.default_rng(0))
        with pytest.raises(DimensionError):
            model.elbo_chunk(np.zeros((3, 2)), np.zeros((3, 1)), np.random.default_rng(0))

    def test_non_finite_names_time_step(self, rng):
        model = VRNNaug(tiny(), seed=1)
        model.params["mlp_y.3.bias"].values = np.array([1e200, 0.0])
        with pytest.raises(NumericError, match="time step 1"):
            model.elbo_chunk(*chunk(rng), np.random.default_rng(0))

    @pytest.mark.parametrize("config, window", [
        (tiny(Variant.FULL), 3),
        (tiny(Variant.FULL, hybrid_gradient=True), 3),
        (tiny(Variant.V1), 3),
        (tiny(Variant.V2), 3),
        (tiny(Variant.FULL, latent_dim=3, hidden_size=8, mlp_min_width=8), 5),
    ], ids=["full", "full-hybrid-gradient", "v1", "v2", "full-w5"])
    def test_gradients_match_finite_differences(self, config, window, rng):
        model = VRNNaug(config, seed=2)
        u, y = chunk(rng, window=window)
        seed = 17
        # Non-zero biases keep every ReLU off its kink when the cold state feeds zeros
        for name, param in model.params.items():
            if name.endswith("bias") or ".b_" in name:
                param.values = rng.normal(scale=0.1, size=param.shape)

        def elbo() -> float:
            return model.elbo_chunk(u, y, np.random.default_rng(seed)).item()

        model.params.zero_grad()
        backward(model.elbo_chunk(u, y, np.random.default_rng(seed)))

        step = 1e-5
        picker = np.random.default_rng(0)
        for name, param in model.params.items():
            # A few entries per tensor keep the check fast
            flat = param.values.reshape(-1)
            for index in picker.choice(flat.size, size=min(3, flat.size), replace=False):
                original = flat[index]
                flat[index] = original + step
                upper = elbo()
                flat[index] = original - step
                lower = elbo()
                flat[index] = original
                numeric = (upper - lower) / (2 * step)
                analytic = param.grad.reshape(-1)[index]
                assert analytic == pytest.approx(numeric, rel=1e-3, abs=1e-6), f"{name}[{index}]"


class TestUnbiasedElbo:
    def test_full_batch_is_plain_sum(self):
        assert unbiased_elbo(Tensor([-1.0, -2.0, -3.0]), 3).item() == -6.0

    def test_hand_example(self):
        assert unbiased_elbo(Tensor([-1.0, -3.0]), 10).item() == pytest.approx(-20.0)

    def test_expectation_over_batches_equals_full_sum(self):
        values = np.array([-1.0, -2.5, -0.5, -4.0])
        estimates = [unbiased_elbo(Tensor(values[list(pair)]), 4).item() for pair in itertools.combinations(range(4), 2)]
        assert np.mean(estimates) == pytest.approx(values.sum(), rel=1e-14)

    def test_empty_batch(self):
        with pytest.raises(ContractError):
            unbiased_elbo(Tensor(np.zeros(0)), 4)

    def test_batch_larger_than_set(self):
        with pytest.raises(ContractError):
            unbiased_elbo(Tensor([-1.0, -2.0]), 1)


class TestWarmState:
    def test_replicated_rows(self, rng):
        model = VRNNaug(tiny(), seed=1)
        u, y = chunk(rng, window=6)
        state = model.warm_state(u, y, 4, np.random.default_rng(0))
        assert state.batch == 4
        np.testing.assert_array_equal(state.h_y.values, np.repeat(state.h_y.values[:1], 4, axis=0))
        np.testing.assert_array_equal(state.y_hat_prev.values, np.full((4, 1), y[-1, 0]))
        assert state.h_y.node is None

    def test_repeat_needs_single_row(self):
        with pytest.raises(ContractError):
            EncoderState.zeros(tiny(), 2).repeat(3)

    def test_cold_state_is_zero(self):
        state = EncoderState.zeros(tiny(Variant.V1), 2)
        assert state.h_z is None and state.h_u is None
        assert state.h_y.shape == (2, 3) and not state.z_prev.values.any()
