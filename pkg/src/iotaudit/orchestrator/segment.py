"""Split a raw capture into per-operation capture files using a timestamp file.

Window membership is closed on both ends so an operation's first and last
packets are never lost; a packet on a shared boundary goes to the earlier
window, which keeps segments + residue an exact repartition of the input.
"""

from __future__ import annotations

import dataclasses
import logging
import re
from pathlib import Path

from ..lifecycle import PhaseLabel
from ..pcapio.pcap import CaptureReader, PcapWriter
from .timestamps import TimestampFile

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class PhaseSegment:
    device_id: str
    operation: str
    phase: PhaseLabel
    start_micros: int
    end_micros: int


@dataclasses.dataclass
class SegmentationResult:
    segments: list[tuple[PhaseSegment, Path]]
    residue_path: Path
    residue_packets: int
    segment_packets: dict[str, int]          # segment file name -> packet count
    out_of_span: list[str]                   # report entries, never silently dropped
    empty_windows: list[str]
    total_packets: int


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def segment_capture(raw_capture: str | Path, timestamps: TimestampFile,
                    output_dir: str | Path) -> SegmentationResult:
    timestamps.validate()
    reader = CaptureReader(raw_capture)
    records = reader.records()
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    link_types = {rec.link_type for rec in records}
    link_type = records[0].link_type if records else (reader.link_type or 1)
    if len(link_types) > 1:
        raise ValueError(f"{raw_capture}: mixed link types {sorted(link_types)} "
                         "cannot be rewritten into classic pcap segments")
    snaplen = reader.snaplen or 262144

    windows = [(e.start_micros, e.end_micros) for e in timestamps.entries]
    span = (records[0].ts_micros, records[-1].ts_micros) if records else None
    out_of_span = []
    for entry, (lo, hi) in zip(timestamps.entries, windows):
        if span is None or hi < span[0] or lo > span[1]:
            out_of_span.append(
                f"window {entry.operation!r} [{lo},{hi}] lies outside capture span")

    segments: list[tuple[PhaseSegment, Path]] = []
    writers: list[PcapWriter] = []
    counts: dict[str, int] = {}
    for i, entry in enumerate(timestamps.entries):
        seg = PhaseSegment(device_id=timestamps.device_id, operation=entry.operation,
                           phase=entry.phase, start_micros=entry.start_micros,
                           end_micros=entry.end_micros)
        path = out / f"{i:03d}_{_safe(entry.operation)}_{entry.phase.value}.pcap"
        segments.append((seg, path))
        writers.append(PcapWriter(path, link_type, snaplen))
        counts[path.name] = 0

    residue_path = out / "residue.pcap"
    residue = PcapWriter(residue_path, link_type, snaplen)
    residue_count = 0
    try:
        for rec in records:
            t = rec.ts_micros
            for idx, (lo, hi) in enumerate(windows):
                if lo <= t <= hi:
                    writers[idx].write_record(rec)
                    counts[segments[idx][1].name] += 1
                    break
            else:
                residue.write_record(rec)
                residue_count += 1
    finally:
        for w in writers:
            w.close()
        residue.close()

    empty = [f"segment {path.name} is empty" for _, path in segments
             if counts[path.name] == 0]
    for msg in empty:
        logger.warning(msg)
    return SegmentationResult(segments=segments, residue_path=residue_path,
                              residue_packets=residue_count, segment_packets=counts,
                              out_of_span=out_of_span, empty_windows=empty,
                              total_packets=len(records))
