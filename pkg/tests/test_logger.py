import logging
from collections.abc import Iterator

import pytest

from src.common.utils import logger as log_module
from src.common.utils.logger import (
    CONSOLE_FORMAT,
    NOTICE_LEVEL,
    RESET,
    ColorFormatter,
    console_handler,
    get_logger,
    logger,
    set_level,
)


class ListHandler(logging.Handler):
    def __init__(self) -> None:
        super().__init__(logging.DEBUG)
        self.records: list[logging.LogRecord] = []

    def emit(self, record: logging.LogRecord) -> None:
        self.records.append(record)


@pytest.fixture
def records() -> Iterator[list[logging.LogRecord]]:
    handler = ListHandler()
    logger.addHandler(handler)
    try:
        yield handler.records
    finally:
        logger.removeHandler(handler)


def test_info_is_routed_to_notice(records: list[logging.LogRecord]):
    logger.info("scored %d sequences", 3)
    assert [(r.levelno, r.levelname, r.getMessage()) for r in records] == [
        (NOTICE_LEVEL, "NOTICE", "scored 3 sequences")
    ]


def test_package_logger_does_not_propagate():
    assert get_logger() is logger
    assert logger.name == "trajscope" and not logger.propagate
    assert console_handler in logger.handlers


def test_set_level_changes_console_threshold():
    before = console_handler.level
    try:
        set_level("debug")
        assert console_handler.level == logging.DEBUG
        set_level("error")
        assert console_handler.level == logging.ERROR
        set_level("chatty")
        assert console_handler.level == NOTICE_LEVEL
    finally:
        console_handler.setLevel(before)


def _record(use_color: bool) -> logging.LogRecord:
    record = logging.LogRecord("trajscope", logging.WARNING, __file__, 1, "odd grid", None, None)
    record.use_color = use_color
    return record


def test_color_only_on_terminals():
    fmt = ColorFormatter(CONSOLE_FORMAT)
    assert fmt.format(_record(False)) == "WARNING | trajscope | odd grid"
    colored = fmt.format(_record(True))
    assert colored.startswith(log_module.COLORS["WARNING"]) and RESET in colored
    assert colored.endswith("| trajscope | odd grid")
