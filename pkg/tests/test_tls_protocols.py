import random

from iotaudit.encryption import Rule, TrafficClassification, Verdict
from iotaudit.pcapio import assemble_flows, parse_capture
from iotaudit.tlsaudit import FlowProtocolInput, detect_protocol_versions

import pcapgen
import tlsgen


def make_flow(tmp_path, client_payload, server_payload, name, server_port=443):
    frames = []
    if client_payload:
        frames.append((0, 0, pcapgen.tcp_frame("10.0.0.2", "47.92.0.9", 5000,
                                               server_port, seq=1, payload=client_payload)))
    if server_payload:
        frames.append((0, 1, pcapgen.tcp_frame("47.92.0.9", "10.0.0.2", server_port,
                                               5000, seq=1, payload=server_payload)))
    p = tmp_path / name
    p.write_bytes(pcapgen.pcap_bytes(frames))
    flows = assemble_flows(parse_capture(p).packets, "dev")
    assert len(flows) == 1
    return flows[0]


def inputs_for(flow, device="dev", phase="setup", verdict=None):
    cls = None
    if verdict is not None:
        cls = TrafficClassification(flow_key=str(flow.key), verdict=verdict,
                                    rule=Rule.ENTROPY_THRESHOLD)
    return [FlowProtocolInput(device_id=device, phase=phase, flow=flow,
                              classification=cls)]


def test_tls12_server_hello(tmp_path):
    flow = make_flow(tmp_path, tlsgen.client_hello(), tlsgen.server_hello(0x0303), "t12.pcap")
    inv = detect_protocol_versions(inputs_for(flow))
    assert inv.rows[("dev", "setup")] == {"TLS1.2"}


def test_tls13_supported_versions_overrides_legacy(tmp_path):
    hello = tlsgen.server_hello(version=0x0303, supported_version=0x0304)
    flow = make_flow(tmp_path, tlsgen.client_hello(), hello, "t13.pcap")
    inv = detect_protocol_versions(inputs_for(flow))
    assert inv.rows[("dev", "setup")] == {"TLS1.3"}


def test_legacy_versions(tmp_path):
    for version, label in ((0x0300, "SSLv3"), (0x0302, "TLS1.1"), (0x0301, "TLS1.0")):
        flow = make_flow(tmp_path, tlsgen.client_hello(),
                         tlsgen.server_hello(version), f"v{version}.pcap")
        inv = detect_protocol_versions(inputs_for(flow))
        assert inv.rows[("dev", "setup")] == {label}, label


def test_sslv2_hello(tmp_path):
    flow = make_flow(tmp_path, tlsgen.sslv2_client_hello(), b"", "v2.pcap")
    inv = detect_protocol_versions(inputs_for(flow))
    assert inv.rows[("dev", "setup")] == {"SSLv2"}


def test_truncated_before_server_hello_is_undetermined(tmp_path):
    flow = make_flow(tmp_path, tlsgen.client_hello(), b"", "trunc.pcap")
    inv = detect_protocol_versions(inputs_for(flow))
    assert inv.rows[("dev", "setup")] == set()
    assert inv.undetermined == 1


def test_encrypted_without_tls_is_proprietary(tmp_path):
    rng = random.Random(1)
    payload = bytes(rng.randrange(256) for _ in range(2048))
    flow = make_flow(tmp_path, payload, b"", "prop.pcap", server_port=8886)
    inv = detect_protocol_versions(inputs_for(flow, verdict=Verdict.ENCRYPTED))
    assert inv.rows[("dev", "setup")] == {"PROPRIETARY"}


def test_unencrypted_without_tls_is_not_proprietary(tmp_path):
    flow = make_flow(tmp_path, b"plain text " * 10, b"", "plain.pcap", server_port=8886)
    inv = detect_protocol_versions(inputs_for(flow, verdict=Verdict.TEXT))
    assert inv.rows[("dev", "setup")] == set()


def test_port_443_ssl_era_framing_is_generic_ssl(tmp_path):
    # v2-style length framing but not a parseable hello
    flow = make_flow(tmp_path, b"\x83\x00\x09" + b"\x00" * 9, b"", "generic.pcap")
    inv = detect_protocol_versions(inputs_for(flow, verdict=Verdict.UNKNOWN))
    assert inv.rows[("dev", "setup")] == {"SSL"}


def test_full_lifecycle_union_and_phase_counts(tmp_path):
    f_setup = make_flow(tmp_path, tlsgen.client_hello(), tlsgen.server_hello(0x0303), "a.pcap")
    f_idle = make_flow(tmp_path, tlsgen.client_hello(), tlsgen.server_hello(0x0302), "b.pcap")
    inv = detect_protocol_versions([
        FlowProtocolInput("dev", "setup", f_setup),
        FlowProtocolInput("dev", "idle", f_idle),
    ])
    assert inv.versions_for_device("dev") == {"TLS1.2", "TLS1.1"}
    assert inv.device_count("TLS1.2") == 1
    assert inv.device_count("TLS1.2", phase="idle") == 0  # per-phase membership


def test_62_of_77_devices_tls12(tmp_path):
    """Corpus shaped to the published full-lifecycle TLS 1.2 device count."""
    hello12 = tlsgen.server_hello(0x0303)
    hello13 = tlsgen.server_hello(0x0303, supported_version=0x0304)
    flow12 = make_flow(tmp_path, tlsgen.client_hello(), hello12, "c12.pcap")
    flow13 = make_flow(tmp_path, tlsgen.client_hello(), hello13, "c13.pcap")
    inputs = []
    for i in range(77):
        flow = flow12 if i < 62 else flow13
        phase = ("setup", "idle", "interaction")[i % 3]
        inputs.append(FlowProtocolInput(f"dev{i:02d}", phase, flow))
    inv = detect_protocol_versions(inputs)
    assert inv.device_count("TLS1.2") == 62
    assert inv.device_count("TLS1.3") == 15
