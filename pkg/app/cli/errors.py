import argparse
import logging

from pydantic import ValidationError

from app.cli.handlers import Handler
from app.config import Config
from app.engine.utils.exceptions import EngineError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DATA = 3


def exit_code(error: BaseException) -> int:
    """
    Process exit code of an exception: 2 argument, 3 data, 4 numeric, 1 anything else.

    :param error: The exception.
    :return: The exit code.
    """
    if isinstance(error, EngineError):
        return error.exit_code
    if isinstance(error, ValidationError):
        return EXIT_USAGE
    if isinstance(error, OSError):
        return EXIT_DATA
    return EXIT_FAILURE


def run_handler(handler: Handler, args: argparse.Namespace, config: Config) -> int:
    """
    Run a command handler and translate its outcome into an exit code.

    :param handler: The handler.
    :param args: Parsed command-line arguments.
    :param config: Application config.
    :return: The exit code.
    """
    try:
        handler(args, config)
    except ValidationError as error:
        logger.error(f"Invalid configuration:\n{error}")
        return exit_code(error)
    except (EngineError, OSError) as error:
        logger.error(f"{type(error).__name__}: {error}")
        return exit_code(error)
    except Exception as error:
        logging.exception(f'Command: {args.command}\nException: {error}')
        return exit_code(error)
    logger.info(f"Command {args.command} finished")
    return EXIT_OK
