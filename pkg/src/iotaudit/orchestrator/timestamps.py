"""Timestamp files: one line per completed operation, hand-editable.

Format (UTF-8, tab-separated, header lines start with '#'):

    # iotaudit timestamps v1
    # status: complete
    <device_id>\t<operation>\t<phase>\t<start_iso8601_ms>\t<end_iso8601_ms>

Monotonicity and non-overlap are enforced when a file is written and
re-validated when it is read back.
"""

from __future__ import annotations

import dataclasses
from datetime import datetime, timezone
from pathlib import Path

from ..lifecycle import PhaseLabel

HEADER = "# iotaudit timestamps v1"


class TimestampFileError(ValueError):
    pass


def _format_ts(micros: int) -> str:
    dt = datetime.fromtimestamp(micros / 1e6, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{(micros % 1_000_000) // 1000:03d}Z"


def _parse_ts(text: str) -> int:
    t = text.strip()
    if t.endswith("Z"):
        t = t[:-1] + "+00:00"
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(round(dt.timestamp() * 1e6))


@dataclasses.dataclass
class TimestampEntry:
    operation: str
    phase: PhaseLabel
    start_micros: int
    end_micros: int

    def __post_init__(self) -> None:
        if self.end_micros < self.start_micros:
            raise TimestampFileError(
                f"entry {self.operation!r}: end precedes start")


@dataclasses.dataclass
class TimestampFile:
    device_id: str
    entries: list[TimestampEntry]
    incomplete: bool = False

    def validate(self) -> None:
        prev: TimestampEntry | None = None
        for entry in self.entries:
            if prev is not None:
                if entry.start_micros < prev.start_micros:
                    raise TimestampFileError(
                        f"entries not monotonic: {entry.operation!r} starts before "
                        f"{prev.operation!r}")
                if entry.start_micros < prev.end_micros:
                    raise TimestampFileError(
                        f"entries overlap: {prev.operation!r} and {entry.operation!r}")
            prev = entry


def write_timestamp_file(path: str | Path, tsf: TimestampFile) -> None:
    tsf.validate()
    lines = [HEADER,
             f"# status: {'incomplete' if tsf.incomplete else 'complete'}"]
    for e in tsf.entries:
        lines.append("\t".join([tsf.device_id, e.operation, e.phase.value,
                                _format_ts(e.start_micros), _format_ts(e.end_micros)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_timestamp_file(path: str | Path) -> TimestampFile:
    device_id = ""
    incomplete = False
    entries: list[TimestampEntry] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            if "status:" in line:
                incomplete = "incomplete" in line
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise TimestampFileError(f"{path}:{lineno}: expected 5 tab-separated fields")
        dev, op, phase, start, end = fields
        if device_id and dev != device_id:
            raise TimestampFileError(f"{path}:{lineno}: mixed device ids "
                                     f"({device_id!r} vs {dev!r})")
        device_id = dev
        entries.append(TimestampEntry(operation=op, phase=PhaseLabel.parse(phase),
                                      start_micros=_parse_ts(start),
                                      end_micros=_parse_ts(end)))
    tsf = TimestampFile(device_id=device_id, entries=entries, incomplete=incomplete)
    tsf.validate()
    return tsf
