import argparse
import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from app.cli.settings import Loader, RunConfig, require_data, resolve_config
from app.cli.storage import Checkpoint, RunStorage
from app.config import Config
from app.engine.data import (
    LinearGaussianSystem,
    TimeSeries,
    chrono_split,
    fit_standardizer,
    load_columns,
    load_csv,
    load_motorcycle,
    shingle,
    simulate_linear_gaussian,
    split_train_valid,
    write_csv,
)
from app.engine.data.io import TIME_COLUMN
from app.engine.metrics import evaluate_run, summarize
from app.engine.model import EncoderState, ForecastSamples, VRNNaug, forecast
from app.engine.training import train
from app.engine.utils.exceptions import ConfigError, DataError
from app.engine.utils.rng import derive_rng

logger = logging.getLogger(__name__)

# Quantile levels of the persisted forecast table
FORECAST_LEVELS = (0.05, 0.5, 0.95)
# Key of the warm-start filtering noise, next to the master seed
WARM_STREAM = 2

Handler = Callable[[argparse.Namespace, Config], None]


def cmd_generate(args: argparse.Namespace, config: Config) -> None:
    """
    Write a simulated linear Gaussian dataset as <name>.csv plus a provenance <name>.json.
    """
    noise = {"process_noise_var": args.process_noise, "measurement_noise_var": args.measurement_noise}
    system = LinearGaussianSystem(**{key: value for key, value in noise.items() if value is not None})
    series = simulate_linear_gaussian(args.length, args.input, args.seed, system)

    output_dir = args.output_dir or config.paths.DATA_DIR
    path = write_csv(series, output_dir / f"{args.name}.csv")
    provenance = {
        "generator": "linear-gaussian",
        "length": args.length,
        "input_mode": args.input,
        "seed": args.seed,
        "system": system.provenance(),
        "u_columns": series.u_names,
        "y_columns": series.y_names,
    }
    (output_dir / f"{args.name}.json").write_text(json.dumps(provenance, indent=2))
    logger.info(f"Wrote {series.length} rows to {path}")
    print(path)


def _train_overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "data": args.data,
        "test_data": args.test_data,
        "loader": args.loader,
        "u_columns": args.u_columns,
        "y_columns": args.y_columns,
        "splits": args.splits,
        "train_fraction": args.train_fraction,
        "whole_series": args.whole_series,
        "window": args.window,
        "latent_dim": args.latent_dim,
        "hidden_size": args.hidden_size,
        "mlp_min_width": args.mlp_min_width,
        "variant": args.variant,
        "hybrid_gradient": args.hybrid_gradient,
        "seed": args.seed,
        "train": {
            "batch_size": args.batch_size,
            "learning_rate": args.lr,
            "max_epochs": args.max_epochs,
            "max_grad_norm": args.max_grad_norm,
        },
        "num_samples": args.num_samples,
        "horizon": args.horizon,
        "warm_start": args.warm_start,
        "per_dimension_ecp": args.per_dimension,
    }


def _load_series(run: RunConfig, path: Path) -> TimeSeries:
    if run.loader == Loader.MOTORCYCLE:
        return load_motorcycle(path)
    return load_csv(path, run.u_columns, run.y_columns)


def load_splits(run: RunConfig) -> tuple[TimeSeries, TimeSeries, TimeSeries]:
    """
    Load the dataset of a run and cut it into train, validation and test series in original units.

    :param run: The run configuration.
    :return: The three series.
    """
    series = _load_series(run, require_data(run))
    if run.whole_series:
        return tuple(series.segment(0, series.length, label) for label in ("train", "valid", "test"))
    if run.test_data is not None:
        train_series, valid_series = split_train_valid(series, run.valid_train_fraction, run.window)
        test_series = _load_series(run, run.test_data)
        return train_series, valid_series, replace(test_series, label="test")
    return chrono_split(series, run.splits, run.window)


def _warm_state(model: VRNNaug, u: np.ndarray, y: np.ndarray, count: int, seed: int) -> EncoderState:
    logger.info(f"Warm start from {u.shape[0]} history rows")
    return model.warm_state(u, y, count, derive_rng(seed, WARM_STREAM))


def _forecast_original_units(
        checkpoint: Checkpoint,
        u: np.ndarray,
        horizon: int,
        num_samples: int,
        seed: int,
        start: int,
        warm_state: EncoderState | None,
) -> ForecastSamples:
    standardized = forecast(
        checkpoint.model,
        checkpoint.standardizer.apply_u(u),
        horizon,
        num_samples,
        seed=seed,
        warm_state=warm_state,
        output_names=checkpoint.y_names,
        start=start,
    )
    return standardized.with_samples(checkpoint.standardizer.invert_y(standardized.samples))


def _persist_forecast(storage: RunStorage, samples: ForecastSamples, root: Path | None = None) -> Path:
    quantiles = summarize(samples, FORECAST_LEVELS).to_frame(samples.output_names, samples.start)
    return storage.save_forecast(samples, quantiles, root)


def cmd_train(args: argparse.Namespace, config: Config) -> None:
    """
    Train a model, then forecast the test split from the trained model and evaluate the forecast.

    The run directory receives the resolved configuration, the checkpoint, the training report, and the test
    forecast with its metrics.
    """
    overrides = _train_overrides(args)
    if args.resume:
        if args.run_dir is None:
            raise ConfigError("--resume needs --run-dir")
        storage = RunStorage(args.run_dir)
        run = resolve_config(args.preset, storage.path(RunStorage.CONFIG), overrides)
    else:
        run = resolve_config(args.preset, args.config, overrides)
        storage = RunStorage(args.run_dir or config.paths.RUNS_DIR / run.run_name())
    require_data(run)
    storage.save_config(run)
    logger.info(f"Run directory: {storage.root}")

    train_series, valid_series, test_series = load_splits(run)
    standardizer = fit_standardizer(train_series)
    train_std, valid_std = standardizer.apply(train_series), standardizer.apply(valid_series)

    model = VRNNaug(run.build_model_config(train_series.input_dim, train_series.output_dim), seed=run.seed)
    state = storage.load_last(model) if args.resume else None
    result = train(
        model,
        shingle(train_std, run.window),
        shingle(valid_std, run.window),
        run.train,
        seed=run.seed,
        state=state,
        on_epoch=storage.save_last,
    )
    storage.save_report(result.report)
    checkpoint = Checkpoint(
        model=result.model,
        standardizer=standardizer,
        u_names=train_series.u_names,
        y_names=train_series.y_names,
        time_index=run.loader == Loader.CSV and not run.u_columns,
        seed=run.seed,
    )
    storage.save_checkpoint(checkpoint)

    if test_series.length == 0:
        logger.warning("The test split is empty; skipping the test forecast")
        return

    horizon = run.horizon or test_series.length
    warm_state = None
    if run.warm_start:
        history = valid_series.segment(max(0, valid_series.length - run.window), valid_series.length, "history")
        warm_state = _warm_state(
            checkpoint.model,
            standardizer.apply_u(history.u),
            standardizer.apply_y(history.y),
            run.num_samples,
            run.seed,
        )
    samples = _forecast_original_units(
        checkpoint, test_series.u, horizon, run.num_samples, run.seed, test_series.offset, warm_state,
    )
    _persist_forecast(storage, samples)

    truth = test_series.segment(0, min(horizon, test_series.length), "test")
    write_csv(truth, storage.path(RunStorage.TEST))
    report, curve = evaluate_run(samples, truth.y, per_dimension=run.per_dimension_ecp)
    storage.save_metrics(report, curve)
    print(report.describe())


def cmd_forecast(args: argparse.Namespace, config: Config) -> None:
    """
    Forecast F steps ahead from a trained run and write forecast_samples.json and forecast_quantiles.csv.
    """
    if args.num_samples < 2:
        raise ConfigError(f"--num-samples must be at least 2, got {args.num_samples}")
    if args.horizon < 1:
        raise ConfigError(f"--horizon must be positive, got {args.horizon}")

    storage = RunStorage(args.run_dir)
    checkpoint = storage.load_checkpoint()
    seed = checkpoint.seed if args.seed is None else args.seed

    if checkpoint.time_index and args.inputs is None:
        u = np.arange(args.start, args.start + args.horizon, dtype=np.float64)[:, None]
    elif args.inputs is None:
        raise ConfigError(f"--inputs with columns {checkpoint.u_names} is required")
    else:
        u = load_columns(args.inputs, [TIME_COLUMN] if checkpoint.time_index else checkpoint.u_names)

    warm_state = None
    if args.history is not None:
        y_history = load_columns(args.history, checkpoint.y_names)
        if checkpoint.time_index:
            u_history = np.arange(args.start - len(y_history), args.start, dtype=np.float64)[:, None]
        else:
            u_history = load_columns(args.history, checkpoint.u_names)
        warm_state = _warm_state(
            checkpoint.model,
            checkpoint.standardizer.apply_u(u_history),
            checkpoint.standardizer.apply_y(y_history),
            args.num_samples,
            seed,
        )

    samples = _forecast_original_units(checkpoint, u, args.horizon, args.num_samples, seed, args.start, warm_state)
    path = _persist_forecast(storage, samples, args.output_dir)
    logger.info(f"Wrote {samples.num_samples} × {samples.horizon} × {samples.output_dim} samples to {path}")
    print(path)


def cmd_evaluate(args: argparse.Namespace, config: Config) -> None:
    """
    Compare persisted forecast samples with observations and write metrics.json and ecp_curve.csv.
    """
    path = args.forecast / RunStorage.SAMPLES if args.forecast.is_dir() else args.forecast
    if not path.is_file():
        raise DataError(f"Forecast file not found: {path}")
    samples = ForecastSamples.from_json(path.read_text())

    truth = load_columns(args.truth, samples.output_names)
    if truth.shape[0] != samples.horizon:
        raise DataError(f"{args.truth} has {truth.shape[0]} rows but the forecast covers {samples.horizon} steps")

    report, curve = evaluate_run(samples, truth, per_dimension=args.per_dimension)
    RunStorage(args.output_dir or path.parent).save_metrics(report, curve)
    print(report.describe())


HANDLERS: dict[str, Handler] = {
    "generate": cmd_generate,
    "train": cmd_train,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
}
