"""Append-only JSON-lines run trace."""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

from .constants import TRACE_VERSION
from .exceptions import CheckpointError
from .logging import get_logger

logger = get_logger(__name__)

HEADER = "header"
AGENT = "agent"
SELECTION = "selection"
EXECUTOR = "executor"
TRIAL = "trial"
MEMORY = "memory"
ABORT = "abort"


def encode_record(record: Mapping[str, Any]) -> str:
    """Stable single-line JSON: sorted keys, compact separators."""
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class TraceWriter:
    """Appends records to a trace file and reports the committed byte offset."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)

    @property
    def offset(self) -> int:
        return self.path.stat().st_size if self.path.exists() else 0

    def start(self, *, seed: int, offset: int = 0) -> int:
        """Begin a fresh trace, or continue one at a committed offset.

        Args:
            seed: Run seed recorded in the header
            offset: Committed length; 0 starts over with a new header

        Returns:
            Offset after the header (or ``offset`` when resuming)
        """
        if offset == 0:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("", encoding="utf-8")
            return self.append([{"type": HEADER, "version": TRACE_VERSION, "seed": seed}])

        self.rewind(offset)
        return offset

    def rewind(self, offset: int) -> None:
        """Drop any uncommitted tail beyond ``offset``.

        Raises:
            CheckpointError: The file is shorter than ``offset``
        """
        size = self.offset
        if size < offset:
            raise CheckpointError(
                f"Trace {self.path} is shorter ({size} bytes) than the checkpoint offset {offset}"
            )
        if size > offset:
            logger.warning("Truncating uncommitted trace tail: %d -> %d bytes", size, offset)
            with self.path.open("r+b") as f:
                f.truncate(offset)

    def append(self, records: Iterable[Mapping[str, Any]]) -> int:
        """Append records as one write and return the new offset."""
        lines = "".join(encode_record(r) + "\n" for r in records)
        with self.path.open("a", encoding="utf-8", newline="\n") as f:
            f.write(lines)
            f.flush()
            os.fsync(f.fileno())
        return self.offset


def read_trace(path: str | Path) -> list[dict[str, Any]]:
    """Read and version-check a trace file.

    Raises:
        CheckpointError: Missing file, bad JSON, or unsupported version
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise CheckpointError(f"Cannot read trace {path}: {e}") from e

    records = []
    for lineno, line in enumerate(lines, start=1):
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise CheckpointError(f"Trace {path} line {lineno} is not JSON: {e}") from e

    if not records or records[0].get("type") != HEADER:
        raise CheckpointError(f"Trace {path} has no header record")
    if records[0].get("version") != TRACE_VERSION:
        raise CheckpointError(
            f"Trace {path} version {records[0].get('version')} unsupported (expected {TRACE_VERSION})"
        )
    return records


def records_of(records: Iterable[Mapping[str, Any]], kind: str) -> list[Mapping[str, Any]]:
    return [r for r in records if r.get("type") == kind]
