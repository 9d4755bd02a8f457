import math

import numpy as np
import pytest
from scipy.special import ndtri

from app.engine.autodiff import Tensor, backward, sum_
from app.engine.model import (
    GaussianDiag,
    gaussian_log_likelihood,
    hybrid_output,
    kl_unit_gaussian,
    reparameterize,
    split_gaussian,
)
from app.engine.utils.exceptions import DimensionError
from tests.helpers import leaf

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def gaussian(mean, log_var) -> GaussianDiag:
    return GaussianDiag(Tensor(mean), Tensor(log_var))


class TestReparameterize:
    def test_zero_noise_returns_mean(self):
        z = reparameterize(gaussian([0.3, -1.0], [0.5, 2.0]), Tensor([0.0, 0.0]))
        np.testing.assert_array_equal(z.values, [0.3, -1.0])

    def test_standard_gaussian_returns_noise(self):
        e = np.array([0.1, -2.0, 1.5])
        z = reparameterize(gaussian(np.zeros(3), np.zeros(3)), Tensor(e))
        np.testing.assert_array_equal(z.values, e)

    def test_hand_example(self):
        z = reparameterize(gaussian([1.0], [math.log(4.0)]), Tensor([0.5]))
        np.testing.assert_allclose(z.values, [2.0], rtol=1e-15)

    def test_gradients(self):
        mean, log_var = leaf([0.2, -0.4], "mean"), leaf([0.3, -1.0], "log_var")
        eps = np.array([1.3, -0.7])
        backward(sum_(reparameterize(GaussianDiag(mean, log_var), Tensor(eps))))
        np.testing.assert_array_equal(mean.grad, [1.0, 1.0])
        np.testing.assert_allclose(log_var.grad, 0.5 * np.exp(0.5 * log_var.values) * eps, rtol=1e-14)

    def test_noise_shape_must_match(self):
        with pytest.raises(DimensionError):
            reparameterize(gaussian([0.0, 0.0], [0.0, 0.0]), Tensor([0.0]))


class TestKl:
    def test_identical_distributions(self):
        assert kl_unit_gaussian(gaussian([0.0, 0.0], [0.0, 0.0])).item() == 0.0

    def test_hand_example(self):
        assert kl_unit_gaussian(gaussian([1.0, 0.0], [0.0, 0.0])).item() == pytest.approx(0.5)

    def test_non_negative(self, rng):
        means, log_vars = rng.normal(size=(50, 4)), rng.normal(scale=2.0, size=(50, 4))
        assert np.all(kl_unit_gaussian(gaussian(means, log_vars)).values >= 0)

    def test_batched_sums_last_axis(self):
        kl = kl_unit_gaussian(gaussian([[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]))
        np.testing.assert_allclose(kl.values, [0.5, 0.0])

    @pytest.mark.parametrize("latent_dim", [1, 10])
    def test_matches_monte_carlo(self, latent_dim, rng):
        count = 100_000
        # Stratified standard normals, shuffled per dimension
        strata = ndtri((np.arange(count) + 0.5) / count)
        for _ in range(100):
            mean, log_var = rng.normal(size=latent_dim), rng.normal(scale=1.5, size=latent_dim)
            eps = np.column_stack([rng.permutation(strata) for _ in range(latent_dim)])
            z = mean + np.exp(0.5 * log_var) * eps
            log_q = np.sum(-0.5 * log_var - 0.5 * eps ** 2, axis=1)
            log_p = np.sum(-0.5 * z ** 2, axis=1)
            terms = log_q - log_p
            standard_error = terms.std() / math.sqrt(count)

            kl = kl_unit_gaussian(gaussian(mean, log_var)).item()
            assert abs(kl - terms.mean()) < 3 * standard_error, (mean, log_var)


class TestLogLikelihood:
    def test_at_mean(self):
        value = gaussian_log_likelihood(Tensor([0.0]), gaussian([0.0], [0.0])).item()
        assert value == pytest.approx(-0.9189385, abs=1e-7)

    def test_one_unit_away(self):
        value = gaussian_log_likelihood(Tensor([1.0]), gaussian([0.0], [0.0])).item()
        assert value == pytest.approx(-HALF_LOG_2PI - 0.5, rel=1e-14)

    def test_scaled_variance(self):
        value = gaussian_log_likelihood(Tensor([3.0, 1.0]), gaussian([1.0, 1.0], [math.log(4.0), 0.0])).item()
        expected = 2 * -HALF_LOG_2PI - 0.5 * math.log(4.0) - 4.0 / 8.0
        assert value == pytest.approx(expected, rel=1e-14)

    def test_density_integrates_to_one(self):
        grid = np.linspace(-12.0, 12.0, 48_001)
        step = grid[1] - grid[0]
        g = gaussian(np.full((grid.size, 1), 0.3), np.full((grid.size, 1), math.log(0.5)))
        density = np.exp(gaussian_log_likelihood(Tensor(grid[:, None]), g).values)
        assert np.sum(density) * step == pytest.approx(1.0, abs=1e-6)

    def test_shape_must_match(self):
        with pytest.raises(DimensionError):
            gaussian_log_likelihood(Tensor([0.0, 1.0]), gaussian([0.0], [0.0]))


class TestHybridOutput:
    def test_idempotent(self):
        y = np.array([1.5, -2.0])
        np.testing.assert_array_equal(hybrid_output(Tensor(y), Tensor(y)).values, y)

    def test_hand_example(self):
        np.testing.assert_array_equal(hybrid_output(Tensor([2.0]), Tensor([0.0])).values, [1.0])

    def test_cold_start(self):
        np.testing.assert_array_equal(hybrid_output(Tensor(np.zeros(2)), Tensor(np.zeros(2))).values, [0.0, 0.0])

    def test_sample_is_detached_by_default(self):
        y, y_hat = leaf([1.0], "y"), leaf([3.0], "y_hat")
        backward(sum_(hybrid_output(y, y_hat)))
        np.testing.assert_array_equal(y.grad, [0.5])
        assert y_hat.grad is None

    def test_sample_gradient_when_enabled(self):
        y, y_hat = leaf([1.0], "y"), leaf([3.0], "y_hat")
        backward(sum_(hybrid_output(y, y_hat, detach=False)))
        np.testing.assert_array_equal(y_hat.grad, [0.5])

    def test_width_mismatch(self):
        with pytest.raises(DimensionError):
            hybrid_output(Tensor([1.0]), Tensor([1.0, 2.0]))


class TestSplitGaussian:
    def test_split_and_clamp(self):
        g = split_gaussian(Tensor([1.0, -2.0, 20.0, -30.0]), 2, -10.0, 10.0)
        np.testing.assert_array_equal(g.mean.values, [1.0, -2.0])
        np.testing.assert_array_equal(g.log_var.values, [10.0, -10.0])

    def test_raw_width(self):
        with pytest.raises(DimensionError):
            split_gaussian(Tensor(np.zeros(3)), 2, -10.0, 10.0)
