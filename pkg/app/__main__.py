import sys
from typing import Sequence

from .cli import HANDLERS, build_parser, run_handler
from .config import load_config
from .logger import setup_logger


def main(argv: Sequence[str] | None = None) -> int:
    """
    Main function that parses the command line, sets up logging and runs the chosen command.

    :param argv: Arguments without the program name, sys.argv by default.
    :return: The process exit code.
    """
    # Parse arguments; usage errors exit with status 2
    args = build_parser().parse_args(argv)
    # Load config
    config = load_config()
    # Set up logging
    setup_logger(config.logging)
    # Run the command
    return run_handler(HANDLERS[args.command], args, config)


if __name__ == "__main__":
    sys.exit(main())
