"""Append-only JSON Lines event log with strict and recovering readers.

The log is the single durable artifact: one JSON object per line, with a
contiguous 1-based ``seq``. The strict reader refuses gaps, duplicates,
and undecodable lines, reporting the first bad sequence number; the
recovering open used by the server tolerates exactly one torn trailing
line (a crash mid-append) by truncating it.
"""

from __future__ import annotations

import json
import os
from typing import Iterable, Optional

from .errors import CorruptLog, StorageFailure
from .kernel import EventRecord


class MemoryEventLog:
    """In-process log for simulations and tests."""

    def __init__(self) -> None:
        self._records: list[EventRecord] = []

    @property
    def last_seq(self) -> int:
        return len(self._records)

    def append(self, occurred_at: int, kind: str, payload: dict) -> EventRecord:
        record = EventRecord(
            seq=self.last_seq + 1, occurred_at=occurred_at, kind=kind, payload=payload
        )
        self._records.append(record)
        return record

    def records(self) -> list[EventRecord]:
        return list(self._records)

    def close(self) -> None:
        pass


class FileEventLog:
    """Durable JSON Lines log.

    With ``fsync=True`` every append reaches disk before the call
    returns — the right trade for a server. Simulations can turn it off
    and still get flush-on-append ordering.
    """

    def __init__(self, path: str, *, fsync: bool = True, recover: bool = False) -> None:
        self.path = path
        self._fsync = fsync
        existing = read_log(path, recover=recover) if os.path.exists(path) else []
        self._seq = existing[-1].seq if existing else 0
        try:
            self._handle = open(path, "a", encoding="utf-8")
        except OSError as exc:
            raise StorageFailure(f"cannot open event log {path}: {exc}") from exc

    @property
    def last_seq(self) -> int:
        return self._seq

    def append(self, occurred_at: int, kind: str, payload: dict) -> EventRecord:
        record = EventRecord(
            seq=self._seq + 1, occurred_at=occurred_at, kind=kind, payload=payload
        )
        line = json.dumps(record.to_dict(), separators=(",", ":"), sort_keys=False)
        try:
            self._handle.write(line + "\n")
            self._handle.flush()
            if self._fsync:
                os.fsync(self._handle.fileno())
        except OSError as exc:
            raise StorageFailure(f"append to {self.path} failed: {exc}") from exc
        self._seq = record.seq
        return record

    def records(self) -> list[EventRecord]:
        self._handle.flush()
        return read_log(self.path, recover=False)

    def close(self) -> None:
        try:
            self._handle.close()
        except OSError:
            pass


def read_log(path: str, *, recover: bool = False) -> list[EventRecord]:
    """Read and validate a log file.

    Strict mode raises :class:`CorruptLog` carrying the first offending
    sequence number. Recover mode truncates a single torn trailing line
    in place and returns the valid prefix; corruption anywhere else
    still raises.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = handle.read()
    except OSError as exc:
        raise StorageFailure(f"cannot read event log {path}: {exc}") from exc

    records: list[EventRecord] = []
    lines = raw.split("\n")
    # A well-formed file ends with a newline, leaving one trailing empty
    # chunk; anything after the last newline is a torn partial append.
    tail = lines.pop() if lines else ""
    valid_bytes = 0
    for index, line in enumerate(lines, start=1):
        record = _decode_line(line, index, path=path, recover=recover)
        if record is None:
            # Recover mode: a bad final complete line counts as torn only
            # if nothing follows it.
            if recover and index == len(lines) and not tail:
                tail = line
                break
            raise CorruptLog(index, f"undecodable or out-of-sequence event at seq {index} in {path}")
        records.append(record)
        valid_bytes += len(line.encode("utf-8")) + 1

    if tail:
        if not recover:
            raise CorruptLog(len(records) + 1, f"torn trailing line in {path}")
        with open(path, "r+", encoding="utf-8") as handle:
            handle.truncate(valid_bytes)
    return records


def _decode_line(
    line: str, expected_seq: int, *, path: str, recover: bool
) -> Optional[EventRecord]:
    try:
        data = json.loads(line)
        record = EventRecord.from_dict(data)
    except (ValueError, KeyError, TypeError):
        return None
    if record.seq != expected_seq:
        if recover:
            return None
        raise CorruptLog(
            expected_seq, f"sequence gap in {path}: expected {expected_seq}, found {record.seq}"
        )
    return record


def write_snapshot(path: str, as_of_seq: int, state: dict) -> None:
    """Write a point-in-time state snapshot next to the log, atomically."""
    blob = json.dumps({"as_of_seq": as_of_seq, "state": state}, separators=(",", ":"))
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as handle:
            handle.write(blob)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except OSError as exc:
        raise StorageFailure(f"cannot write snapshot {path}: {exc}") from exc


def read_snapshot(path: str) -> tuple[int, dict]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise StorageFailure(f"cannot read snapshot {path}: {exc}") from exc
    except ValueError as exc:
        raise CorruptLog(0, f"snapshot {path} is not valid JSON") from exc
    return int(data["as_of_seq"]), data["state"]
