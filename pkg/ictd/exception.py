import logging
import traceback
from typing import Optional

logging_level_selector = {
    'WARNING': logging.warning,
    'ERROR': logging.error
}

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class IctdError(Exception):
    pass


class DimensionError(IctdError, ValueError):
    pass


class ParameterError(IctdError, ValueError):
    pass


class DomainError(IctdError, ValueError):
    pass


class BoundsError(IctdError, IndexError):
    pass


class ConfigError(IctdError, ValueError):
    pass


class DegenerateInputError(IctdError, ValueError):
    pass


class SingularityError(IctdError, ArithmeticError):

    def __init__(self, message: str, condition: Optional[float] = None):
        super().__init__(message)
        self.condition = condition


class ConvergenceError(IctdError, ArithmeticError):

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(IctdError, ArithmeticError):
    pass


def usage_error_handler(command: str, exc: Exception) -> int:
    _log_traceback(exc, command, EXIT_USAGE, 'WARNING')
    return EXIT_USAGE


def exception_handler(command: str, exc: Exception) -> int:
    _log_traceback(exc, command, EXIT_FAILURE, 'ERROR')
    return EXIT_FAILURE


def _log_traceback(exc, command, exit_code, severity):
    traceback_str = ''.join(traceback.format_exception(type(exc), exc, exc.__traceback__))
    log_entry = {
        "event": "command_failed",
        "command": command,
        "error": f"{type(exc).__name__}: {exc}",
        "exit_code": exit_code,
        "traceback": traceback_str
    }
    logging_level_selector[severity](log_entry)
