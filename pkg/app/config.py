import logging
from dataclasses import dataclass
from pathlib import Path

from environs import Env

ENV_PREFIX = "VRNNAUG_"


@dataclass
class PathsConfig:
    """
    Data class representing where the application reads and writes files.

    Attributes:
    - RUNS_DIR (Path): Parent directory of run directories.
    - DATA_DIR (Path): Directory of datasets; generated datasets go here by default.
    """
    RUNS_DIR: Path
    DATA_DIR: Path


@dataclass
class LoggingConfig:
    """
    Data class representing the configuration for logging.

    Attributes:
    - LEVEL (int): Root log level.
    - DIR (Path): Directory of the rotating log files.
    - TO_FILE (bool): Whether to write log files at all.
    """
    LEVEL: int
    DIR: Path
    TO_FILE: bool


@dataclass
class Config:
    """
    Data class representing the overall configuration for the application.

    Attributes:
    - paths (PathsConfig): The paths configuration.
    - logging (LoggingConfig): The logging configuration.
    """
    paths: PathsConfig
    logging: LoggingConfig


def load_config() -> Config:
    """
    Load the configuration from VRNNAUG_* environment variables (and a .env file, if present).

    :return: The Config object with loaded configuration.
    """
    env = Env()
    env.read_env()

    with env.prefixed(ENV_PREFIX):
        return Config(
            paths=PathsConfig(
                RUNS_DIR=env.path("RUNS_DIR", Path("runs")),
                DATA_DIR=env.path("DATA_DIR", Path("data")),
            ),
            logging=LoggingConfig(
                LEVEL=env.log_level("LOG_LEVEL", logging.INFO),
                DIR=env.path("LOGS_DIR", Path(".logs")),
                TO_FILE=env.bool("LOG_TO_FILE", True),
            ),
        )
