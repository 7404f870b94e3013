import logging
from enum import Enum
from typing import Any, Iterable, Literal, Optional, Type

from rich.console import Console
from rich.logging import RichHandler

#-------------#
# Definitions #
#-------------#

LOGGER_NAME = "tunneling"
LOG_FORMAT = "%(message)s"

MESSAGE_LEVELS: dict[str, int] = {
    "error": logging.ERROR,
    "warning": logging.WARNING,
    "hint": logging.INFO,
}

console = Console(stderr=True)
logger = logging.getLogger(LOGGER_NAME)

#------------#
# Exceptions #
#------------#

class TunnelingError(Exception):
    """Root of every failure raised by the toolkit."""

class ConfigError(TunnelingError, ValueError):
    pass

class GridTooNarrowError(TunnelingError, ValueError):
    pass

class ProbeError(TunnelingError, ValueError):
    pass

class SolverBreakdownError(TunnelingError, ArithmeticError):
    pass

class DistributionError(TunnelingError, ValueError):
    pass

class ScatteringError(TunnelingError, ValueError):
    pass

class EnsembleError(TunnelingError, ValueError):
    pass

#---------#
# Classes #
# --------#

class ExtendedEnum(Enum):

    def __str__(self):
        return self.name.lower().replace("_", "-")

    @classmethod
    def list(cls) -> list:
        return list(map(lambda c: c.value, cls))

    @classmethod
    def from_str(cls, value: str) -> "ExtendedEnum":
        for member in cls:
            if str(member) == value or member.value == value:
                return member
        print_message(
            f"Unknown {cls.__name__} '{value}' (expected one of: {', '.join(map(str, cls.list()))})",
            "error", ConfigError
        )

#------------------#
# Helper Functions #
# -----------------#

def setup_logging(level: int | str = logging.INFO) -> logging.Logger:
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(console=console, show_path=False, rich_tracebacks=True)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
    logger.setLevel(level)
    return logger


def print_message(msg: str, type: Literal["error", "warning", "hint"], exception: Optional[Type[Exception]]=None):
    print_str = f"[{type.upper()}] {msg}"

    if exception is not None:
        logger.debug(print_str)
        raise exception(print_str)

    logger.log(MESSAGE_LEVELS[type], print_str)


def tuplization(mydata: Any | Iterable[Any]) -> tuple:
    if isinstance(mydata, (str, bytes)) or not isinstance(mydata, Iterable):
        return (mydata,)
    return tuple(mydata)


def format_number(value: Any) -> str:
    if isinstance(value, (bool, str)):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".12g")
