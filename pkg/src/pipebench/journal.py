"""Append-only study journal with per-line checksums.

Every state transition of a study is appended as one newline-delimited JSON
record carrying a monotone sequence number and a CRC over its payload, so a
crashed run can be replayed exactly: a torn tail line is detected and
dropped, while interior corruption refuses to replay.
"""

from __future__ import annotations

import json
import os
import threading
import zlib
from pathlib import Path
from typing import Any, Callable, Iterable

EV_STUDY_STARTED = "study_started"
EV_TRIAL_CREATED = "trial_created"
EV_TRIAL_RESTARTED = "trial_restarted"
EV_VALUE_REPORTED = "value_reported"
EV_STATE_CHANGED = "state_changed"
EV_CACHE = "cache_event"
EV_STUDY_FINISHED = "study_finished"

EVENT_TYPES = (
    EV_STUDY_STARTED,
    EV_TRIAL_CREATED,
    EV_TRIAL_RESTARTED,
    EV_VALUE_REPORTED,
    EV_STATE_CHANGED,
    EV_CACHE,
    EV_STUDY_FINISHED,
)


class JournalError(RuntimeError):
    pass


class JournalCorruptError(JournalError):
    """An interior journal line failed to parse or verify."""


def _encode(record: dict[str, Any]) -> str:
    body = json.dumps(record, sort_keys=True, separators=(",", ":"))
    checked = dict(record)
    checked["crc"] = zlib.crc32(body.encode("utf-8"))
    return json.dumps(checked, sort_keys=True, separators=(",", ":"))


def _decode(line: str) -> dict[str, Any] | None:
    """Parsed record, or None if the line is torn or checksum-invalid."""
    try:
        record = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(record, dict) or "crc" not in record:
        return None
    crc = record.pop("crc")
    body = json.dumps(record, sort_keys=True, separators=(",", ":"))
    if zlib.crc32(body.encode("utf-8")) != crc:
        return None
    return record


class StudyJournal:
    """Single-writer appender over a journal file.

    All events are funneled through one lock; each append is flushed (and by
    default fsynced) before returning, so the journal survives a hard kill at
    any point with at most the final line torn.
    """

    def __init__(
        self,
        path: str | Path,
        *,
        fsync: bool = True,
        on_append: Callable[[], None] | None = None,
    ):
        self.path = Path(path)
        self.fsync = fsync
        self.on_append = on_append
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        existing = replay_journal(self.path) if self.path.exists() else []
        self._next_seq = (existing[-1]["seq"] + 1) if existing else 1
        if existing and self.path.exists():
            # Drop any torn tail now so appended events follow a clean prefix.
            _rewrite_clean(self.path, existing)
        self._fh = open(self.path, "a", encoding="utf-8")

    @property
    def is_fresh(self) -> bool:
        return self._next_seq == 1

    def append(self, event: str, payload: dict[str, Any]) -> int:
        if event not in EVENT_TYPES:
            raise JournalError(f"unknown event type {event!r}")
        with self._lock:
            seq = self._next_seq
            record = {"seq": seq, "event": event, **payload}
            self._fh.write(_encode(record) + "\n")
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())
            self._next_seq += 1
        if self.on_append is not None:
            self.on_append()
        return seq

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.close()

    def __enter__(self) -> "StudyJournal":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def _rewrite_clean(path: Path, events: list[dict[str, Any]]) -> None:
    raw = path.read_text(encoding="utf-8")
    lines = raw.splitlines()
    if len(lines) == len(events):
        return
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for line in lines[: len(events)]:
            fh.write(line + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def replay_journal(path: str | Path) -> list[dict[str, Any]]:
    """All valid events in order; a torn final line is silently dropped.

    Raises :class:`JournalCorruptError` when an interior line is damaged or
    sequence numbers have gaps.
    """
    path = Path(path)
    events: list[dict[str, Any]] = []
    lines = path.read_text(encoding="utf-8").splitlines()
    for i, line in enumerate(lines):
        if not line.strip():
            if i == len(lines) - 1:
                break
            raise JournalCorruptError(f"{path}: blank interior line {i + 1}")
        record = _decode(line)
        if record is None:
            if i == len(lines) - 1:
                break
            raise JournalCorruptError(f"{path}: corrupt line {i + 1}")
        events.append(record)
    expected = 1
    for record in events:
        if record.get("seq") != expected:
            raise JournalCorruptError(
                f"{path}: sequence gap, expected {expected} got {record.get('seq')}"
            )
        expected += 1
    return events


def iter_events_since(events: Iterable[dict[str, Any]], since: int) -> list[dict[str, Any]]:
    return [e for e in events if e["seq"] > since]
