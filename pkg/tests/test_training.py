import json

import numpy as np
import pytest
from pydantic import ValidationError

from app.engine.data import ChunkSet, fit_standardizer, shingle, simulate_linear_gaussian
from app.engine.model import ModelConfig, VRNNaug
from app.engine.nn import ParamStore
from app.engine.training import (
    EpochRecord,
    OptimState,
    Termination,
    TrainerState,
    TrainReport,
    TrainSettings,
    adam_step,
    clip_grad_norm,
    evaluate_loss,
    lr_schedule,
    train,
)
from app.engine.training import trainer
from app.engine.utils.exceptions import ContractError, DataError, NumericError
from app.engine.utils.rng import derive_rng


def adam_oracle(theta, grads, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    m, v = np.zeros_like(theta), np.zeros_like(theta)
    for step, grad in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad ** 2
        m_hat, v_hat = m / (1 - beta1 ** step), v / (1 - beta2 ** step)
        theta = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    return theta


def store_with(**values) -> ParamStore:
    store = ParamStore()
    for name, value in values.items():
        store.register(name, np.asarray(value, dtype=np.float64))
    return store


class TestAdam:
    def test_zero_gradient_keeps_parameters(self):
        store = store_with(w=[1.0, -2.0])
        adam_step(store, OptimState(), {"w": np.zeros(2)})
        np.testing.assert_array_equal(store["w"].values, [1.0, -2.0])

    def test_first_step(self):
        store = store_with(theta=0.0)
        state = OptimState(lr=0.001)
        adam_step(store, state, {"theta": np.array(1.0)})
        assert store["theta"].values == pytest.approx(-0.001 / (1 + 1e-8), rel=1e-12)
        assert state.step == 1

    def test_matches_oracle(self, rng):
        theta = rng.normal(size=(3, 2))
        grads = [rng.normal(size=(3, 2)) for _ in range(10)]
        store, state = store_with(w=theta), OptimState()
        for grad in grads:
            adam_step(store, state, {"w": grad})
        np.testing.assert_allclose(store["w"].values, adam_oracle(theta, grads), rtol=0, atol=1e-12)

    def test_uses_accumulated_gradients(self):
        store = store_with(w=[0.0])
        store["w"].grad = np.array([2.0])
        adam_step(store, OptimState(lr=0.01))
        np.testing.assert_allclose(store["w"].values, [-0.01], rtol=1e-6)

    def test_non_finite_gradient_names_parameter(self):
        store = store_with(a=[1.0], b=[2.0])
        state = OptimState()
        with pytest.raises(NumericError, match="'b'"):
            adam_step(store, state, {"a": np.array([1.0]), "b": np.array([np.nan])})
        np.testing.assert_array_equal(store["a"].values, [1.0])
        assert state.step == 0

    def test_missing_gradient(self):
        with pytest.raises(ContractError):
            adam_step(store_with(a=[1.0]), OptimState())

    def test_wrong_gradient_shape(self):
        with pytest.raises(ContractError):
            adam_step(store_with(a=[1.0, 2.0]), OptimState(), {"a": np.zeros(3)})

    def test_learning_rate_must_be_positive(self):
        with pytest.raises(ContractError):
            OptimState(lr=0.0)

    def test_state_round_trip(self, rng):
        store, state = store_with(w=rng.normal(size=2)), OptimState()
        adam_step(store, state, {"w": rng.normal(size=2)})
        restored = OptimState.from_dict(json.loads(json.dumps(state.to_dict())))
        assert restored.step == 1
        np.testing.assert_array_equal(restored.v["w"], state.v["w"])


def test_clip_grad_norm():
    store = store_with(a=[0.0], b=[0.0])
    store["a"].grad, store["b"].grad = np.array([3.0]), np.array([4.0])
    assert clip_grad_norm(store, 1.0) == pytest.approx(5.0)
    np.testing.assert_allclose([store["a"].grad[0], store["b"].grad[0]], [0.6, 0.8])


class TestSchedule:
    @pytest.mark.parametrize("epoch", range(1, 10))
    def test_first_epochs_keep_rate(self, epoch):
        decision = lr_schedule(epoch, [1.0] * epoch, 1e-3)
        assert decision.lr == 1e-3 and not decision.halved and decision.stop is None

    def test_no_check_at_first_window(self):
        assert lr_schedule(10, [1.0] * 10, 1e-3).lr == 1e-3

    def test_stagnation_halves(self):
        history = [1.0 - 0.01 * e for e in range(10)] + [0.95] * 10
        decision = lr_schedule(20, history, 1e-3)
        assert decision.halved and decision.lr == pytest.approx(5e-4)

    def test_equal_best_counts_as_stagnation(self):
        decision = lr_schedule(20, [1.0] * 20, 1e-3)
        assert decision.halved

    def test_improvement_keeps_rate(self):
        history = [1.0 - 0.01 * e for e in range(20)]
        assert not lr_schedule(20, history, 1e-3).halved

    def test_only_checked_every_ten_epochs(self):
        assert not lr_schedule(25, [1.0] * 25, 1e-3).halved

    def test_floor_stops_training(self):
        lr = 1e-3
        for _ in range(9):
            lr *= 0.5
        decision = lr_schedule(110, [1.0] * 110, lr, max_epochs=200)
        assert decision.lr == pytest.approx(1e-3 / 1024)
        assert decision.stop == Termination.LR_FLOOR

    def test_epoch_cap(self):
        history = [1.0 - 0.001 * e for e in range(100)]
        assert lr_schedule(100, history, 1e-3).stop == Termination.MAX_EPOCHS

    def test_history_length(self):
        with pytest.raises(ContractError):
            lr_schedule(3, [1.0, 2.0], 1e-3)


def test_settings_cap_learning_rate():
    with pytest.raises(ValidationError):
        TrainSettings(learning_rate=1e-2)


@pytest.fixture
def chunks():
    series = simulate_linear_gaussian(40, seed=4)
    train_series, valid_series = series.segment(0, 28, "train"), series.segment(28, 40, "valid")
    standardizer = fit_standardizer(train_series)
    return shingle(standardizer.apply(train_series), 5), shingle(standardizer.apply(valid_series), 5)


def small_model() -> VRNNaug:
    return VRNNaug(ModelConfig(input_dim=1, output_dim=1, latent_dim=2, hidden_size=3, mlp_min_width=3), seed=1)


SETTINGS = TrainSettings(batch_size=8, max_epochs=2)


class TestTrain:
    def test_runs_and_reports(self, chunks):
        seen = []
        result = train(small_model(), *chunks, SETTINGS, seed=0, on_epoch=lambda state, model: seen.append(state.epoch))
        assert [record.epoch for record in result.report.records] == [1, 2]
        assert result.report.termination == Termination.MAX_EPOCHS.value
        assert seen == [1, 2]
        assert all(np.isfinite(result.report.train_losses + result.report.valid_losses))

    def test_deterministic(self, chunks):
        first = train(small_model(), *chunks, SETTINGS, seed=3).report
        second = train(small_model(), *chunks, SETTINGS, seed=3).report
        assert first.trace_csv() == second.trace_csv()

    def test_best_parameters_restored(self, chunks):
        result = train(small_model(), *chunks, SETTINGS, seed=0)
        report = result.report
        assert report.best_valid_loss == min(report.valid_losses)
        assert report.best_epoch == report.valid_losses.index(report.best_valid_loss) + 1
        for name, values in result.state.best.items():
            np.testing.assert_array_equal(result.model.params[name].values, values)

    def test_validation_loss_is_reproducible(self, chunks):
        model = small_model()
        valid = chunks[1]
        first = evaluate_loss(model, valid, np.random.default_rng(2), len(valid))
        second = evaluate_loss(model, valid, np.random.default_rng(2), len(valid))
        expected = -model.elbo_batch(valid.u, valid.y, np.random.default_rng(2)).values.mean()
        assert first == second
        assert first == pytest.approx(expected, rel=1e-12)

    def test_validation_noise_is_the_same_every_epoch(self, chunks, monkeypatch):
        states = []

        def record(model, valid, rng, batch_size):
            states.append(rng.bit_generator.state["state"])
            return original(model, valid, rng, batch_size)

        original = trainer.evaluate_loss
        monkeypatch.setattr(trainer, "evaluate_loss", record)
        train(small_model(), *chunks, TrainSettings(batch_size=8, max_epochs=3), seed=6)
        assert len(states) == 3
        assert states[0] == states[1] == states[2]

    def test_reported_validation_loss_uses_seeded_stream(self, chunks):
        result = train(small_model(), *chunks, TrainSettings(batch_size=8, max_epochs=1), seed=6)
        again = evaluate_loss(result.model, chunks[1], derive_rng(6, *trainer.VALID_KEYS), 8)
        assert result.report.valid_losses[0] == again

    def test_resume_matches_uninterrupted_run(self, chunks):
        saved = {}

        def keep(state, model):
            saved["state"] = json.dumps(state.to_dict())
            saved["params"] = model.params.snapshot()

        train(small_model(), *chunks, SETTINGS, seed=5, on_epoch=keep)
        resumed_model = small_model()
        resumed_model.params.restore(saved["params"])
        state = TrainerState.from_dict(json.loads(saved["state"]))
        resumed = train(resumed_model, *chunks, TrainSettings(batch_size=8, max_epochs=3), seed=5, state=state)

        full = train(small_model(), *chunks, TrainSettings(batch_size=8, max_epochs=3), seed=5)
        assert [record.epoch for record in resumed.report.records] == [1, 2, 3]
        assert resumed.report.trace_csv() == full.report.trace_csv()

    def test_finished_run_does_nothing(self, chunks):
        result = train(small_model(), *chunks, SETTINGS, seed=0)
        again = train(result.model, *chunks, SETTINGS, seed=0, state=result.state)
        assert len(again.report.records) == 2

    def test_empty_chunks(self, chunks):
        empty = ChunkSet(np.zeros((0, 5, 1)), np.zeros((0, 5, 1)))
        with pytest.raises(DataError):
            train(small_model(), chunks[0], empty, SETTINGS)

    def test_numeric_failure_has_context(self, chunks):
        model = small_model()
        model.params["mlp_y.3.bias"].values = np.array([1e200, 0.0])
        with pytest.raises(NumericError, match="Epoch 1, batch 1"):
            train(model, *chunks, SETTINGS)

    def test_gradient_clipping(self, chunks):
        settings = TrainSettings(batch_size=8, max_epochs=1, max_grad_norm=1e-3)
        result = train(small_model(), *chunks, settings, seed=0)
        assert len(result.report.records) == 1


class TestReport:
    def test_trace_has_no_timings(self):
        report = TrainReport([EpochRecord(1, 2.5, 3.5, 1e-3, seconds=1.25)])
        assert report.trace_csv().splitlines() == ["epoch,train_loss,valid_loss,lr", "1,2.5,3.5,0.001"]

    def test_dict_round_trip(self):
        report = TrainReport([EpochRecord(1, 2.5, 3.5, 1e-3)], "max_epochs", 1, 3.5)
        assert TrainReport.from_dict(json.loads(report.to_json())) == report
