"""Unit tests for the JSON-lines run trace."""

import json
from pathlib import Path

import pytest

from posttrain_search.exceptions import CheckpointError
from posttrain_search.tracefile import (
    TRIAL,
    TraceWriter,
    encode_record,
    read_trace,
    records_of,
)


@pytest.mark.phase7
def test_encode_record_is_stable() -> None:
    """Test key order and separators do not depend on insertion order."""
    assert encode_record({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
    assert encode_record({"a": [1, 2], "b": 1}) == encode_record({"b": 1, "a": [1, 2]})


@pytest.mark.phase7
def test_start_writes_header(tmp_path: Path) -> None:
    """Test a fresh trace begins with a versioned header."""
    writer = TraceWriter(tmp_path / "runs" / "trace.jsonl")
    offset = writer.start(seed=42)

    records = read_trace(writer.path)
    assert records == [{"type": "header", "version": 1, "seed": 42}]
    assert offset == writer.path.stat().st_size


@pytest.mark.phase7
def test_append_returns_committed_offset(tmp_path: Path) -> None:
    """Test appends advance the offset by whole lines."""
    writer = TraceWriter(tmp_path / "trace.jsonl")
    start = writer.start(seed=1)
    end = writer.append([{"type": TRIAL, "step": 1}, {"type": "memory", "version": 1}])

    assert end > start
    records = read_trace(writer.path)
    assert [r["type"] for r in records] == ["header", "trial", "memory"]
    assert records_of(records, TRIAL) == [{"type": "trial", "step": 1}]


@pytest.mark.phase7
def test_resume_truncates_uncommitted_tail(tmp_path: Path) -> None:
    """Test continuing at an offset drops records written after it."""
    writer = TraceWriter(tmp_path / "trace.jsonl")
    committed = writer.start(seed=1)
    writer.append([{"type": TRIAL, "step": 1}])

    resumed = TraceWriter(writer.path)
    assert resumed.start(seed=1, offset=committed) == committed
    assert len(read_trace(writer.path)) == 1


@pytest.mark.phase7
def test_resume_rejects_short_trace(tmp_path: Path) -> None:
    """Test a trace shorter than the checkpoint offset cannot be continued."""
    writer = TraceWriter(tmp_path / "trace.jsonl")
    writer.start(seed=1)
    with pytest.raises(CheckpointError, match="shorter"):
        writer.start(seed=1, offset=10_000)


@pytest.mark.phase7
def test_read_trace_errors(tmp_path: Path) -> None:
    """Test missing, corrupt, headerless and future-version traces."""
    with pytest.raises(CheckpointError, match="Cannot read"):
        read_trace(tmp_path / "missing.jsonl")

    path = tmp_path / "trace.jsonl"
    path.write_text("{broken\n", encoding="utf-8")
    with pytest.raises(CheckpointError, match="not JSON"):
        read_trace(path)

    path.write_text(json.dumps({"type": "trial"}) + "\n", encoding="utf-8")
    with pytest.raises(CheckpointError, match="no header"):
        read_trace(path)

    path.write_text(json.dumps({"type": "header", "version": 99}) + "\n", encoding="utf-8")
    with pytest.raises(CheckpointError, match="version 99"):
        read_trace(path)
