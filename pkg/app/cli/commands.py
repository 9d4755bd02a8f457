import argparse
from pathlib import Path

from app.cli.settings import PRESETS, Loader
from app.engine.data import InputMode
from app.engine.model import Variant

# Command name -> description shown in --help
COMMANDS = {
    "generate": "Generate a synthetic linear Gaussian dataset",
    "train": "Train a model, forecast the test split and evaluate it",
    "forecast": "Forecast from a trained run by Monte-Carlo rollout",
    "evaluate": "Evaluate forecast samples against observations",
}


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _add_generate(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--name", required=True, help="Dataset name; writes <name>.csv and <name>.json")
    parser.add_argument("--length", type=int, required=True, help="Number of time steps T")
    parser.add_argument("--input", choices=[mode.value for mode in InputMode], default=InputMode.EXCITATION.value,
                        help="Input signal: uniform excitation or the sinusoid test signal")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--process-noise", type=float, default=None, help="Process noise variance (default 0.5)")
    parser.add_argument("--measurement-noise", type=float, default=None,
                        help="Measurement noise variance (default 1)")
    parser.add_argument("--output-dir", type=Path, default=None, help="Target directory (default VRNNAUG_DATA_DIR)")


def _add_train(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", choices=sorted(PRESETS), default=None)
    parser.add_argument("--config", type=Path, default=None, help="JSON run configuration")
    parser.add_argument("--run-dir", type=Path, default=None, help="Run directory (default VRNNAUG_RUNS_DIR/<name>)")
    parser.add_argument("--resume", action="store_true", help="Continue the run in --run-dir from last.json")

    data = parser.add_argument_group("data")
    data.add_argument("--data", type=Path, default=None)
    data.add_argument("--test-data", type=Path, default=None, help="Separate test file")
    data.add_argument("--loader", choices=[loader.value for loader in Loader], default=None)
    data.add_argument("--u-columns", nargs="*", default=None)
    data.add_argument("--y-columns", nargs="+", default=None)
    data.add_argument("--splits", nargs=3, type=float, default=None, metavar=("TRAIN", "VALID", "TEST"))
    data.add_argument("--train-fraction", type=float, default=None)
    data.add_argument("--whole-series", action="store_true", default=None)
    data.add_argument("--window", type=positive_int, default=None, help="Chunk size W")

    model = parser.add_argument_group("model")
    model.add_argument("--latent-dim", type=positive_int, default=None)
    model.add_argument("--hidden-size", type=positive_int, default=None)
    model.add_argument("--mlp-min-width", type=positive_int, default=None)
    model.add_argument("--variant", choices=[variant.value for variant in Variant], default=None)
    model.add_argument("--hybrid-gradient", action="store_true", default=None)
    model.add_argument("--seed", type=int, default=None)

    optim = parser.add_argument_group("optimization")
    optim.add_argument("--batch-size", type=positive_int, default=None)
    optim.add_argument("--lr", type=float, default=None)
    optim.add_argument("--max-epochs", type=positive_int, default=None)
    optim.add_argument("--max-grad-norm", type=float, default=None)

    forecast = parser.add_argument_group("test forecast")
    forecast.add_argument("--num-samples", type=int, default=None, help="Trajectories K")
    forecast.add_argument("--horizon", type=positive_int, default=None, help="Steps F (default: whole test split)")
    forecast.add_argument("--warm-start", action="store_true", default=None)
    forecast.add_argument("--per-dimension", action="store_true", default=None,
                          help="Per-output columns in the ECP curve")


def _add_forecast(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--run-dir", type=Path, required=True)
    parser.add_argument("--horizon", type=int, required=True, help="Steps F")
    parser.add_argument("--inputs", type=Path, default=None, help="CSV with the input columns for every step")
    parser.add_argument("--start", type=int, default=0, help="Time index of the first step")
    parser.add_argument("--num-samples", type=int, default=100, help="Trajectories K")
    parser.add_argument("--seed", type=int, default=None, help="Default: the run's seed")
    parser.add_argument("--history", type=Path, default=None,
                        help="CSV with inputs and outputs preceding the forecast, for a warm start")
    parser.add_argument("--output-dir", type=Path, default=None, help="Default: the run directory")


def _add_evaluate(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--forecast", type=Path, required=True, help="forecast_samples.json or its directory")
    parser.add_argument("--truth", type=Path, required=True, help="CSV with one column per forecast output")
    parser.add_argument("--per-dimension", action="store_true")
    parser.add_argument("--output-dir", type=Path, default=None, help="Default: the forecast's directory")


def build_parser() -> argparse.ArgumentParser:
    """
    Build the command-line parser with one sub-command per entry of COMMANDS.

    :return: The parser.
    """
    parser = argparse.ArgumentParser(
        prog="python -m app",
        description="Probabilistic forecasting with variational recurrent state-space models.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    builders = {
        "generate": _add_generate,
        "train": _add_train,
        "forecast": _add_forecast,
        "evaluate": _add_evaluate,
    }
    for name, description in COMMANDS.items():
        builders[name](subparsers.add_parser(name, help=description, description=description))
    return parser
