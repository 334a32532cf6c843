"""Artifact I/O: atomic writes, JSONL records and CSV tables."""

import json
import os
import tempfile
from collections.abc import Iterable, Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Any, TypeVar

import pandas as pd
from pydantic import BaseModel, ValidationError

from src.common.errors import RecordParseError

M = TypeVar("M", bound=BaseModel)


@contextmanager
def atomic_open(path: str | Path, mode: str = "w") -> Iterator[IO[Any]]:
    """Write to a temp file next to `path`, then rename over it on success."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        encoding = None if "b" in mode else "utf-8"
        with os.fdopen(fd, mode, encoding=encoding, newline=None if "b" in mode else "\n") as f:
            yield f
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_json(path: str | Path, data: Any) -> None:
    with atomic_open(path) as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise RecordParseError(str(path), 1, str(e)) from e


def write_jsonl(path: str | Path, records: Iterable[BaseModel]) -> int:
    n = 0
    with atomic_open(path) as f:
        for record in records:
            f.write(record.model_dump_json())
            f.write("\n")
            n += 1
    return n


def iter_jsonl(path: str | Path, model: type[M]) -> Iterator[M]:
    """Yield validated records; blank lines are skipped, record numbers are 1-based lines."""
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                yield model.model_validate_json(line)
            except ValidationError as e:
                raise RecordParseError(str(path), lineno, e.errors()[0]["msg"]) from e


def write_csv(path: str | Path, frame: pd.DataFrame) -> None:
    with atomic_open(path) as f:
        frame.to_csv(f, index=False, lineterminator="\n")


def read_csv(path: str | Path, columns: list[str], dtype: dict[str, Any] | None = None) -> pd.DataFrame:
    """Read a CSV and check it carries `columns`."""
    try:
        frame = pd.read_csv(path, dtype=dtype)  # pyright: ignore[reportArgumentType]
    except (ValueError, pd.errors.ParserError) as e:
        raise RecordParseError(str(path), 0, str(e)) from e
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise RecordParseError(str(path), 0, f"missing columns {missing}")
    for column in columns:
        bad = frame[column].isna()
        if bad.any():
            # +2: header line, then 1-based data rows
            raise RecordParseError(str(path), int(bad.to_numpy().argmax()) + 2, f"empty {column!r}")
    return frame
