"""
Command-line entry point.

This module:
- sets up Google Cloud Logging, falling back to local logging
- registers the verify / train / demo / replay subcommands
- maps exceptions to exit codes (2 for usage errors, 1 otherwise)
"""

import argparse
import logging as log
from typing import List, Optional, Sequence, Tuple, Type

from google.cloud import logging as gcp_logging

from ictd import __version__
from ictd.commands.router import register_commands
from ictd.env_variables import ICTD_LOG_LEVEL, LOGGING_NAME
from ictd.exception import (ConfigError, DomainError, ParameterError, exception_handler,
                            usage_error_handler)

EXCEPTION_HANDLERS: List[Tuple[Type[BaseException], object]] = [
    (ConfigError, usage_error_handler),
    (ParameterError, usage_error_handler),
    (DomainError, usage_error_handler),
    (Exception, exception_handler),
]


def setup_logging() -> None:
    log.basicConfig(level=ICTD_LOG_LEVEL)
    if not LOGGING_NAME:
        return
    try:
        logging_client = gcp_logging.Client()
        logging_client.setup_logging(name=LOGGING_NAME)
    except Exception as e:
        log.warning(f"Failed to initialize Google Cloud Logging: {e}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ictd", description="In-context temporal difference learning experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    register_commands(parser)
    return parser


def handle_exception(command: str, exc: Exception) -> int:
    for exc_type, handler in EXCEPTION_HANDLERS:
        if isinstance(exc, exc_type):
            return handler(command, exc)
    raise exc


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging()
    try:
        return args.run(args)
    except Exception as e:
        return handle_exception(args.command, e)
