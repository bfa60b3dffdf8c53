"""Per-device, per-phase inventory of negotiated SSL/TLS protocol versions."""

from __future__ import annotations

import dataclasses
from collections import defaultdict

from ..encryption.cascade import TrafficClassification, Verdict
from ..pcapio.flows import FlowRecord
from ..pcapio.tls import parse_flow_tls

PROPRIETARY = "PROPRIETARY"
SSL_GENERIC = "SSL"

_VERSION_LABELS = {
    0x0002: "SSLv2",
    0x0300: "SSLv3",
    0x0301: "TLS1.0",
    0x0302: "TLS1.1",
    0x0303: "TLS1.2",
    0x0304: "TLS1.3",
}

VERSION_COLUMNS = ["TLS1.0", "TLS1.1", "TLS1.2", "TLS1.3", SSL_GENERIC,
                   "SSLv2", "SSLv3", PROPRIETARY]


@dataclasses.dataclass
class FlowProtocolInput:
    device_id: str
    phase: str
    flow: FlowRecord
    classification: TrafficClassification | None = None


@dataclasses.dataclass
class ProtocolInventory:
    rows: dict[tuple[str, str], set[str]]     # (device_id, phase) -> version labels
    undetermined: int = 0                     # handshakes truncated before ServerHello

    def versions_for_device(self, device_id: str) -> set[str]:
        """Full-lifecycle version set: the union over the device's phases."""
        out: set[str] = set()
        for (dev, _phase), versions in self.rows.items():
            if dev == device_id:
                out |= versions
        return out

    def device_count(self, version: str, phase: str | None = None) -> int:
        if phase is None:
            devices = {dev for (dev, _p), vs in self.rows.items() if version in vs}
        else:
            devices = {dev for (dev, p), vs in self.rows.items()
                       if p == phase and version in vs}
        return len(devices)


def _ssl_era_framing(flow: FlowRecord) -> bool:
    """Port-443 traffic framed like a pre-TLS SSL record but unparseable as
    SSLv2/SSLv3/TLS; reported as generic SSL rather than invented data."""
    if 443 not in (flow.key.port_a, flow.key.port_b):
        return False
    for payload in (flow.payload_initiator, flow.payload_responder):
        if len(payload) >= 3 and (payload[0] & 0x80 or payload[0] in (20, 21, 22, 23)):
            return True
    return False


def detect_protocol_versions(inputs: list[FlowProtocolInput]) -> ProtocolInventory:
    """Version is read from the negotiated ServerHello, never ClientHello
    offers; TLS 1.3 is recognized through supported_versions despite its 1.2
    record stamp. Encrypted flows without TLS records count as PROPRIETARY."""
    rows: dict[tuple[str, str], set[str]] = defaultdict(set)
    undetermined = 0
    for item in inputs:
        key = (item.device_id, item.phase)
        rows.setdefault(key, set())
        session = parse_flow_tls(item.flow)
        if session is None:
            verdict = item.classification.verdict if item.classification else None
            if verdict == Verdict.ENCRYPTED:
                rows[key].add(PROPRIETARY)
            elif _ssl_era_framing(item.flow):
                rows[key].add(SSL_GENERIC)
            continue
        if session.sslv2:
            rows[key].add("SSLv2")
            continue
        if not session.saw_server_hello:
            undetermined += 1
            continue
        label = _VERSION_LABELS.get(session.server_version)
        if label is None:
            rows[key].add(SSL_GENERIC)
        else:
            rows[key].add(label)
    return ProtocolInventory(rows=dict(rows), undetermined=undetermined)
