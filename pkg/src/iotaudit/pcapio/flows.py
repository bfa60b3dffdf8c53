"""Bidirectional flow assembly: canonical 5-tuple grouping, TCP reassembly,
UDP inactivity splitting, and lightweight protocol tagging."""

from __future__ import annotations

import dataclasses
import struct

from .packet import PacketRecord, Transport

UDP_FLOW_GAP_SECONDS = 120.0
REASSEMBLY_CAP = 1 << 20          # per direction; bounds memory on video flows

HTTP_METHODS = (b"GET ", b"POST ", b"PUT ", b"DELETE ", b"HEAD ", b"OPTIONS ",
                b"PATCH ", b"CONNECT ", b"TRACE ")


@dataclasses.dataclass(frozen=True, order=True)
class FlowKey:
    """Canonical 5-tuple: the lexicographically lower endpoint comes first."""

    transport: str
    ip_a: str
    port_a: int
    ip_b: str
    port_b: int

    @classmethod
    def canonical(cls, transport: Transport, src: str, sport: int | None,
                  dst: str, dport: int | None) -> "FlowKey":
        a = (src, sport if sport is not None else -1)
        b = (dst, dport if dport is not None else -1)
        lo, hi = sorted((a, b))
        return cls(transport.value, lo[0], lo[1], hi[0], hi[1])

    def __str__(self) -> str:
        return f"{self.transport}:{self.ip_a}:{self.port_a}<->{self.ip_b}:{self.port_b}"


@dataclasses.dataclass
class FlowRecord:
    key: FlowKey
    device_id: str
    packets: list[PacketRecord]
    initiator: tuple[str, int | None]        # endpoint that sent the first packet
    bytes_total: int = 0
    payload_initiator: bytes = b""
    payload_responder: bytes = b""
    protocol_tags: set[str] = dataclasses.field(default_factory=set)
    truncated: bool = False                  # reassembly cap hit
    reassembly_gaps: int = 0

    @property
    def first_ts(self) -> int:
        return self.packets[0].ts_micros

    @property
    def payload_bytes_total(self) -> int:
        return len(self.payload_initiator) + len(self.payload_responder)

    def remote_endpoint(self, device_ips: set[str]) -> tuple[str, int | None]:
        """The non-device endpoint; falls back to the responder side."""
        a = (self.key.ip_a, self.key.port_a if self.key.port_a >= 0 else None)
        b = (self.key.ip_b, self.key.port_b if self.key.port_b >= 0 else None)
        if a[0] in device_ips and b[0] not in device_ips:
            return b
        if b[0] in device_ips and a[0] not in device_ips:
            return a
        return b if a == self.initiator else a

    def direction_of(self, pkt: PacketRecord) -> str:
        return "initiator" if (pkt.src_ip, pkt.src_port) == self.initiator else "responder"


def assemble_flows(packets, device_id: str = "",
                   udp_gap: float = UDP_FLOW_GAP_SECONDS) -> list[FlowRecord]:
    """Group packets into bidirectional flows.

    Every packet lands in exactly one flow: port-bearing packets by canonical
    5-tuple (UDP conversations split on an inactivity gap), everything else in
    an OTHER bucket keyed by IP pair. Output order is deterministic: first
    packet timestamp, then key.
    """
    open_flows: dict[FlowKey, FlowRecord] = {}
    last_seen: dict[FlowKey, int] = {}
    finished: list[FlowRecord] = []
    gap_micros = int(udp_gap * 1_000_000)

    for pkt in packets:
        key = FlowKey.canonical(pkt.transport, pkt.src_ip, pkt.src_port,
                                pkt.dst_ip, pkt.dst_port)
        flow = open_flows.get(key)
        if (flow is not None and pkt.transport == Transport.UDP
                and pkt.ts_micros - last_seen[key] > gap_micros):
            finished.append(flow)
            flow = None
        if flow is None:
            flow = FlowRecord(key=key, device_id=device_id, packets=[],
                              initiator=(pkt.src_ip, pkt.src_port))
            open_flows[key] = flow
        flow.packets.append(pkt)
        flow.bytes_total += pkt.wire_length
        last_seen[key] = pkt.ts_micros

    finished.extend(open_flows.values())
    for flow in finished:
        _reassemble(flow)
        _tag_protocols(flow)
    finished.sort(key=lambda f: (f.first_ts, f.key))
    return finished


def _reassemble(flow: FlowRecord) -> None:
    if flow.key.transport == Transport.TCP.value:
        flow.payload_initiator = _tcp_direction(flow, "initiator")
        flow.payload_responder = _tcp_direction(flow, "responder")
    else:
        ini, res = [], []
        for pkt in flow.packets:
            (ini if flow.direction_of(pkt) == "initiator" else res).append(pkt.payload)
        flow.payload_initiator = b"".join(ini)[:REASSEMBLY_CAP]
        flow.payload_responder = b"".join(res)[:REASSEMBLY_CAP]


def _tcp_direction(flow: FlowRecord, direction: str) -> bytes:
    """In-order payload for one direction: sequence-sorted, duplicates dropped,
    gaps skipped (counted), capped at REASSEMBLY_CAP."""
    segs: list[tuple[int, bytes]] = []
    isn: int | None = None
    for pkt in flow.packets:
        if flow.direction_of(pkt) != direction or pkt.tcp_seq is None:
            continue
        if pkt.tcp_flags & 0x02 and isn is None:  # SYN occupies one sequence number
            isn = (pkt.tcp_seq + 1) & 0xFFFFFFFF
        if pkt.payload:
            segs.append((pkt.tcp_seq, pkt.payload))
    if not segs:
        return b""
    base = isn if isn is not None else segs[0][0]
    rel = sorted(((seq - base) & 0xFFFFFFFF, data) for seq, data in segs)
    out: list[bytes] = []
    expected = rel[0][0]
    emitted = 0
    for off, data in rel:
        if off > expected:
            flow.reassembly_gaps += 1
        elif off < expected:
            keep = off + len(data) - expected
            if keep <= 0:
                continue  # pure retransmission
            data = data[-keep:]
            off = expected
        room = REASSEMBLY_CAP - emitted
        if room <= 0:
            flow.truncated = True
            break
        if len(data) > room:
            data = data[:room]
            flow.truncated = True
        out.append(data)
        emitted += len(data)
        expected = off + len(data)
    return b"".join(out)


def _looks_like_tls(payload: bytes) -> str | None:
    if len(payload) >= 3 and payload[0] in (20, 21, 22, 23) and payload[1] == 3 and payload[2] <= 4:
        return "TLS"
    # SSLv2 record: high bit set on a 2-byte length, handshake type 1 (ClientHello)
    if len(payload) >= 5 and payload[0] & 0x80 and payload[2] == 0x01 and payload[3] == 0x00:
        return "SSLV2"
    return None


def _looks_like_dns(payload: bytes, tcp: bool) -> bool:
    msg = payload[2:] if tcp and len(payload) >= 2 else payload
    if len(msg) < 12:
        return False
    qd, an = struct.unpack("!HH", msg[4:8])
    return qd <= 16 and an <= 256


def _tag_protocols(flow: FlowRecord) -> None:
    key = flow.key
    ports = {key.port_a, key.port_b}
    tcp = key.transport == Transport.TCP.value
    ini, res = flow.payload_initiator, flow.payload_responder
    if 53 in ports and (_looks_like_dns(ini, tcp) or _looks_like_dns(res, tcp)):
        flow.protocol_tags.add("DNS")
    for payload in (ini, res):
        tag = _looks_like_tls(payload)
        if tag:
            flow.protocol_tags.add(tag)
    if ini.startswith(HTTP_METHODS) or res.startswith(b"HTTP/1."):
        flow.protocol_tags.add("HTTP")
    if key.transport == Transport.UDP.value and 123 in ports and \
            max(len(ini), len(res)) >= 48:
        flow.protocol_tags.add("NTP")
