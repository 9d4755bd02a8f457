import logging
import os
from datetime import datetime
from logging.handlers import TimedRotatingFileHandler

from app.config import LoggingConfig


def setup_logger(config: LoggingConfig) -> None:
    """
    Set up the logger configuration for the application.

    Logs go to the console and, unless disabled, to a timed rotating file in the logs directory with a one-day
    rotation.

    :param config: The logging configuration.
    :return: None
    """
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if config.TO_FILE:
        # Ensure the logs directory exists
        os.makedirs(config.DIR, exist_ok=True)
        handlers.append(
            TimedRotatingFileHandler(
                filename=config.DIR / f"{datetime.now().strftime('%Y-%m-%d_%H-%M-%S')}.log",
                when="midnight",
                interval=1,
                backupCount=7,  # Keep logs for 7 days
            )
        )

    logging.basicConfig(
        level=config.LEVEL,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',  # noqa
        handlers=handlers,
    )
