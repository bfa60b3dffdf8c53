from .process_file import OperationProcessFile, Operation, load_process_file
from .timestamps import TimestampEntry, TimestampFile, read_timestamp_file, write_timestamp_file
from .session import run_capture_session, ScriptedOperator, InteractiveOperator, CaptureError, SystemClock
from .segment import PhaseSegment, SegmentationResult, segment_capture

__all__ = [
    "OperationProcessFile", "Operation", "load_process_file",
    "TimestampEntry", "TimestampFile", "read_timestamp_file", "write_timestamp_file",
    "run_capture_session", "ScriptedOperator", "InteractiveOperator", "CaptureError",
    "SystemClock",
    "PhaseSegment", "SegmentationResult", "segment_capture",
]
