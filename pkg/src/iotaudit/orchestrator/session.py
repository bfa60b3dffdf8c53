"""Interactive capture sessions: start the capture subprocess, walk the
operator through the operation sequence, log start/end times.

Both the clock and the operator are injectable so the confirmation and abort
contracts are testable without a human or a capture interface.
"""

from __future__ import annotations

import logging
import shlex
import subprocess
import time
from pathlib import Path

from .process_file import OperationProcessFile
from .timestamps import TimestampEntry, TimestampFile, write_timestamp_file

logger = logging.getLogger(__name__)

ABORT_TOKENS = {"abort", "quit", "q"}

DEFAULT_CAPTURE_CMD = "tcpdump -i {iface} -w {output} -U"


class CaptureError(RuntimeError):
    pass


class OperatorAbort(Exception):
    pass


class SystemClock:
    def now(self) -> float:
        return time.time()

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


class InteractiveOperator:
    """Prompts on the terminal; any abort token cancels the session."""

    def prompt(self, message: str) -> str:
        return input(message + " ").strip().lower()


class ScriptedOperator:
    """Replays confirmations from a list or a file (one response per line).

    Optional per-response delays ("<seconds>:<response>") advance the supplied
    clock, which keeps min-duration tests free of real sleeps.
    """

    def __init__(self, responses, clock=None):
        if isinstance(responses, (str, Path)):
            responses = Path(responses).read_text(encoding="utf-8").splitlines()
        self._responses = list(responses)
        self._clock = clock
        self._pos = 0

    def prompt(self, message: str) -> str:
        if self._pos >= len(self._responses):
            return "abort"
        response = self._responses[self._pos]
        self._pos += 1
        if ":" in response:
            delay, _, rest = response.partition(":")
            try:
                seconds = float(delay)
            except ValueError:
                return response.strip().lower()
            if self._clock is not None:
                self._clock.sleep(seconds)
            return rest.strip().lower()
        return response.strip().lower()


def run_capture_session(process_file: OperationProcessFile,
                        capture_interface: str,
                        output_dir: str | Path,
                        device_id: str = "device",
                        operator=None,
                        clock=None,
                        capture_cmd: str = DEFAULT_CAPTURE_CMD,
                        clock_offset: float = 0.0) -> tuple[Path, TimestampFile]:
    """Run one capture session; returns (raw capture path, timestamp file).

    The capture subprocess must come up before any prompt is issued; if it
    dies at startup the session aborts without leaving a timestamp file.
    Operator aborts flush the entries completed so far, flagged incomplete.
    ``clock_offset`` shifts recorded times for captures taken on a remote
    router whose clock is known to differ from the orchestrator host.
    """
    operator = operator or InteractiveOperator()
    clock = clock or SystemClock()
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw_path = out / f"{device_id}_raw.pcap"
    ts_path = out / f"{device_id}_timestamps.tsv"

    cmd = shlex.split(capture_cmd.format(iface=capture_interface, output=raw_path))
    try:
        proc = subprocess.Popen(cmd, stdout=subprocess.DEVNULL, stderr=subprocess.PIPE)
    except OSError as exc:
        raise CaptureError(f"capture subprocess failed to start: {exc}") from exc
    time.sleep(0.05)
    if proc.poll() is not None:
        stderr = proc.stderr.read().decode(errors="replace") if proc.stderr else ""
        raise CaptureError(
            f"capture subprocess exited immediately (rc={proc.returncode}): {stderr.strip()}")

    def offset_micros() -> int:
        return int(round((clock.now() + clock_offset) * 1e6))

    entries: list[TimestampEntry] = []
    aborted = False
    try:
        for op in process_file.operations:
            logger.info("operation %s (%s): %s", op.name, op.phase, op.instructions)
            if operator.prompt(f"[{op.phase}] {op.name}: {op.instructions}\n"
                               f"press enter to START") in ABORT_TOKENS:
                raise OperatorAbort
            start = offset_micros()
            start_wall = clock.now()
            while True:
                if operator.prompt(f"{op.name}: press enter when FINISHED") in ABORT_TOKENS:
                    raise OperatorAbort
                elapsed = clock.now() - start_wall
                if elapsed + 1e-9 >= op.min_duration:
                    break
                remaining = op.min_duration - elapsed
                logger.warning("%s requires %.0f s; %.0f s remain", op.name,
                               op.min_duration, remaining)
            entries.append(TimestampEntry(operation=op.name, phase=op.phase,
                                          start_micros=start, end_micros=offset_micros()))
    except OperatorAbort:
        aborted = True
    finally:
        proc.terminate()
        try:
            proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    tsf = TimestampFile(device_id=device_id, entries=entries, incomplete=aborted)
    write_timestamp_file(ts_path, tsf)
    return raw_path, tsf
