from .commands import COMMANDS, build_parser
from .errors import exit_code, run_handler
from .handlers import HANDLERS, cmd_evaluate, cmd_forecast, cmd_generate, cmd_train
from .settings import PRESETS, Loader, RunConfig, resolve_config
from .storage import Checkpoint, RunStorage

__all__ = [
    "COMMANDS",
    "Checkpoint",
    "HANDLERS",
    "Loader",
    "PRESETS",
    "RunConfig",
    "RunStorage",
    "build_parser",
    "cmd_evaluate",
    "cmd_forecast",
    "cmd_generate",
    "cmd_train",
    "exit_code",
    "resolve_config",
    "run_handler",
]
