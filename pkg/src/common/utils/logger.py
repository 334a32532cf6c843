import logging
import os
import sys
from typing import Any

NOTICE_LEVEL = 25
logging.addLevelName(NOTICE_LEVEL, "NOTICE")


RESET = "\033[0m"
COLORS = {
    "DEBUG": "\033[36m",  # Cyan
    "INFO": "\033[32m",  # Green
    "NOTICE": "\033[38;5;33m",  # Blue-ish
    "WARNING": "\033[33m",  # Yellow
    "ERROR": "\033[31m",  # Red
    "CRITICAL": "\033[1;41m",  # White on red
}

# TRAJSCOPE_LOG value -> console threshold
LEVELS = {
    "error": logging.ERROR,
    "info": NOTICE_LEVEL,
    "debug": logging.DEBUG,
}


class ColorFormatter(logging.Formatter):
    """Only color console output, and only on a terminal."""

    def format(self, record: logging.LogRecord) -> str:
        if getattr(record, "use_color", False):
            color = COLORS.get(record.levelname, "")
            record.levelname = f"{color}{record.levelname:<7}{RESET}"
        return super().format(record)


# -------------------------------------------------------------------
# Custom Logger: route info() -> NOTICE
# -------------------------------------------------------------------
class CustomLogger(logging.Logger):
    def info(self, msg: object, *args: Any, **kwargs: Any) -> None:
        if self.isEnabledFor(NOTICE_LEVEL):
            super().log(NOTICE_LEVEL, msg, *args, **kwargs)


logging.setLoggerClass(CustomLogger)


# no timestamps on the console so repeated runs log identically
CONSOLE_FORMAT = "%(levelname)s | %(name)s | %(message)s"
FILE_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def _console_level() -> int:
    raw = os.environ.get("TRAJSCOPE_LOG", "info").strip().lower()
    return LEVELS.get(raw, NOTICE_LEVEL)


console_handler = logging.StreamHandler(sys.stderr)
console_handler.setLevel(_console_level())
console_handler.setFormatter(ColorFormatter(CONSOLE_FORMAT))
console_handler.addFilter(lambda record: setattr(record, "use_color", sys.stderr.isatty()) or True)


package_logger = logging.getLogger("trajscope")
package_logger.setLevel(logging.DEBUG)
package_logger.propagate = False
package_logger.handlers.clear()
package_logger.addHandler(console_handler)

LOG_FILE = os.environ.get("TRAJSCOPE_LOG_FILE")
if LOG_FILE:
    file_handler = logging.FileHandler(LOG_FILE, encoding="utf-8")
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT))
    package_logger.addHandler(file_handler)


def set_level(name: str) -> None:
    """Change console verbosity at runtime (`error`, `info` or `debug`)."""
    console_handler.setLevel(LEVELS.get(name.strip().lower(), NOTICE_LEVEL))


def get_logger(name: str | None = None) -> logging.Logger:
    return logging.getLogger(name or "trajscope")


logger = get_logger("trajscope")
if os.environ.get("TRAJSCOPE_LOG", "info").strip().lower() not in LEVELS:
    logger.warning("Unknown TRAJSCOPE_LOG value %r, using 'info'", os.environ["TRAJSCOPE_LOG"])
logger.debug("Logger initialized successfully.")
