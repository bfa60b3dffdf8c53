import pytest

from iotaudit.lifecycle import PhaseLabel
from iotaudit.orchestrator import (CaptureError, OperationProcessFile, Operation,
                                   ScriptedOperator, load_process_file,
                                   read_timestamp_file, run_capture_session)

# writes an empty-but-valid pcap so segmenting the "raw capture" also works
STUB_CAPTURE = ("/bin/sh -c 'printf \"\\324\\303\\262\\241\\002\\000\\004\\000"
                "\\000\\000\\000\\000\\000\\000\\000\\000\\000\\000\\004\\000"
                "\\001\\000\\000\\000\" > {output}; sleep 30'")


class FakeClock:
    def __init__(self, t0=1_709_280_000.0):
        self.t = t0

    def now(self):
        return self.t

    def sleep(self, seconds):
        self.t += seconds


def process(*ops):
    return OperationProcessFile(device_category="camera", operations=list(ops))


def op(name, phase="setup", min_duration=0.0):
    return Operation(name=name, phase=PhaseLabel.parse(phase),
                     instructions=f"do {name}", min_duration=min_duration)


def test_three_operations_complete(tmp_path):
    clock = FakeClock()
    operator = ScriptedOperator(["1:", "5:", "1:", "5:", "1:", "5:"], clock=clock)
    raw, tsf = run_capture_session(process(op("a"), op("b", "interaction"), op("c", "idle")),
                                   "lo", tmp_path, device_id="cam01",
                                   operator=operator, clock=clock,
                                   capture_cmd=STUB_CAPTURE)
    assert raw.exists()
    assert len(tsf.entries) == 3
    assert not tsf.incomplete
    starts = [e.start_micros for e in tsf.entries]
    assert starts == sorted(starts)
    back = read_timestamp_file(tmp_path / "cam01_timestamps.tsv")
    assert [e.operation for e in back.entries] == ["a", "b", "c"]


def test_abort_flushes_completed_entries(tmp_path):
    clock = FakeClock()
    operator = ScriptedOperator(["", "1:", "abort"], clock=clock)
    _, tsf = run_capture_session(process(op("a"), op("b"), op("c")), "lo", tmp_path,
                                 device_id="cam01", operator=operator, clock=clock,
                                 capture_cmd=STUB_CAPTURE)
    assert len(tsf.entries) == 1
    assert tsf.entries[0].operation == "a"
    assert tsf.incomplete
    assert read_timestamp_file(tmp_path / "cam01_timestamps.tsv").incomplete


def test_min_duration_refuses_early_confirmation(tmp_path):
    clock = FakeClock()
    # operator confirms at 58 s (refused: 60 s idle minimum), then at 61 s
    operator = ScriptedOperator(["", "58:", "3:"], clock=clock)
    _, tsf = run_capture_session(process(op("settle", "idle", min_duration=60)),
                                 "lo", tmp_path, device_id="cam01",
                                 operator=operator, clock=clock,
                                 capture_cmd=STUB_CAPTURE)
    assert len(tsf.entries) == 1
    duration = tsf.entries[0].end_micros - tsf.entries[0].start_micros
    assert duration >= 60_000_000


def test_capture_start_failure_leaves_no_timestamp_file(tmp_path):
    with pytest.raises(CaptureError):
        run_capture_session(process(op("a")), "lo", tmp_path, device_id="cam01",
                            operator=ScriptedOperator([""]), clock=FakeClock(),
                            capture_cmd="/bin/false")
    assert not (tmp_path / "cam01_timestamps.tsv").exists()


def test_missing_capture_binary(tmp_path):
    with pytest.raises(CaptureError):
        run_capture_session(process(op("a")), "lo", tmp_path,
                            operator=ScriptedOperator([""]), clock=FakeClock(),
                            capture_cmd="/no/such/capture-binary -i {iface} -w {output}")


def test_process_file_loading(tmp_path):
    doc = tmp_path / "proc.yaml"
    doc.write_text(
        "device_category: camera\n"
        "operations:\n"
        "  - {name: power_on, phase: setup, instructions: plug in, min_duration: 10}\n"
        "  - {name: watch, phase: interaction, instructions: open app}\n")
    pf = load_process_file(doc)
    assert pf.device_category == "camera"
    assert [o.name for o in pf.operations] == ["power_on", "watch"]
    assert pf.operations[0].min_duration == 10


def test_process_file_rejects_duplicate_names():
    with pytest.raises(ValueError):
        process(op("a"), op("a"))


def test_process_file_rejects_negative_duration():
    with pytest.raises(ValueError):
        op("a", min_duration=-1)


def test_clock_offset_shifts_recorded_times(tmp_path):
    clock = FakeClock()
    operator = ScriptedOperator(["", "1:"], clock=clock)
    _, tsf = run_capture_session(process(op("a")), "lo", tmp_path, device_id="cam01",
                                 operator=operator, clock=clock,
                                 capture_cmd=STUB_CAPTURE, clock_offset=100.0)
    assert tsf.entries[0].start_micros >= int((1_709_280_000.0 + 100.0) * 1e6)
