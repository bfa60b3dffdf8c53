"""Static TLS/SSL dissection of reassembled flow payloads: record layer,
hello messages, certificate chains, and PSK cipher-suite detection."""

from __future__ import annotations

import dataclasses
import struct

from .flows import FlowRecord

CONTENT_CCS = 20
CONTENT_ALERT = 21
CONTENT_HANDSHAKE = 22
CONTENT_APPDATA = 23

HS_CLIENT_HELLO = 1
HS_SERVER_HELLO = 2
HS_CERTIFICATE = 11

EXT_SNI = 0
EXT_SUPPORTED_VERSIONS = 43

VERSION_NAMES = {
    0x0002: "SSLv2",
    0x0300: "SSLv3",
    0x0301: "TLS1.0",
    0x0302: "TLS1.1",
    0x0303: "TLS1.2",
    0x0304: "TLS1.3",
}

# PSK key-exchange cipher suites (RFC 4279/5487/5489 and the CCM family).
_PSK_RANGES = ((0x008A, 0x0095), (0x00A8, 0x00B9), (0xC033, 0xC039), (0xC0A4, 0xC0AB))


def is_psk_suite(suite: int) -> bool:
    return any(lo <= suite <= hi for lo, hi in _PSK_RANGES)


@dataclasses.dataclass
class TlsRecord:
    content_type: int
    version: int
    body: bytes


@dataclasses.dataclass
class TlsSession:
    """What one flow's handshake reveals, direction-aware."""

    client_version: int | None = None        # ClientHello legacy version
    client_offered: list[int] = dataclasses.field(default_factory=list)
    sni: str | None = None
    server_record_version: int | None = None
    server_version: int | None = None        # negotiated (supported_versions wins)
    cipher_suite: int | None = None
    certificates: list[bytes] = dataclasses.field(default_factory=list)
    app_data_records: list[bytes] = dataclasses.field(default_factory=list)
    sslv2: bool = False
    saw_client_hello: bool = False
    saw_server_hello: bool = False

    @property
    def version_name(self) -> str | None:
        if self.sslv2:
            return "SSLv2"
        if self.server_version is None:
            return None
        return VERSION_NAMES.get(self.server_version, f"0x{self.server_version:04x}")

    @property
    def negotiated_psk(self) -> bool:
        return self.cipher_suite is not None and is_psk_suite(self.cipher_suite)


def parse_records(stream: bytes) -> list[TlsRecord]:
    records = []
    off = 0
    while off + 5 <= len(stream):
        ctype = stream[off]
        version, length = struct.unpack("!HH", stream[off + 1:off + 5])
        if ctype not in (CONTENT_CCS, CONTENT_ALERT, CONTENT_HANDSHAKE, CONTENT_APPDATA):
            break
        if (version >> 8) != 3:
            break
        body = stream[off + 5:off + 5 + length]
        if len(body) < length:
            break  # truncated capture; keep what framed cleanly
        records.append(TlsRecord(ctype, version, body))
        off += 5 + length
    return records


def _iter_handshakes(records: list[TlsRecord]):
    """Handshake messages reassembled across record boundaries, up to the
    first ChangeCipherSpec (everything after is encrypted)."""
    buf = b""
    for rec in records:
        if rec.content_type == CONTENT_CCS:
            break
        if rec.content_type != CONTENT_HANDSHAKE:
            continue
        buf += rec.body
    off = 0
    while off + 4 <= len(buf):
        msg_type = buf[off]
        (length,) = struct.unpack("!I", b"\x00" + buf[off + 1:off + 4])
        body = buf[off + 4:off + 4 + length]
        if len(body) < length:
            break
        yield msg_type, body
        off += 4 + length


def _parse_extensions(data: bytes):
    off = 0
    while off + 4 <= len(data):
        etype, elen = struct.unpack("!HH", data[off:off + 4])
        yield etype, data[off + 4:off + 4 + elen]
        off += 4 + elen


def _parse_client_hello(body: bytes, session: TlsSession) -> None:
    if len(body) < 35:
        return
    session.saw_client_hello = True
    (session.client_version,) = struct.unpack("!H", body[0:2])
    off = 34
    sid_len = body[off]; off += 1 + sid_len
    if off + 2 > len(body):
        return
    (cs_len,) = struct.unpack("!H", body[off:off + 2]); off += 2 + cs_len
    if off >= len(body):
        return
    comp_len = body[off]; off += 1 + comp_len
    if off + 2 > len(body):
        return
    (ext_len,) = struct.unpack("!H", body[off:off + 2]); off += 2
    for etype, edata in _parse_extensions(body[off:off + ext_len]):
        if etype == EXT_SNI and len(edata) >= 5:
            (name_len,) = struct.unpack("!H", edata[3:5])
            session.sni = edata[5:5 + name_len].decode("ascii", errors="replace")
        elif etype == EXT_SUPPORTED_VERSIONS and len(edata) >= 1:
            count = edata[0]
            session.client_offered = [
                struct.unpack("!H", edata[1 + i:3 + i])[0]
                for i in range(0, count, 2) if 3 + i <= len(edata)]


def _parse_server_hello(body: bytes, session: TlsSession) -> None:
    if len(body) < 35:
        return
    session.saw_server_hello = True
    (legacy,) = struct.unpack("!H", body[0:2])
    session.server_version = legacy
    off = 34
    sid_len = body[off]; off += 1 + sid_len
    if off + 3 > len(body):
        return
    (session.cipher_suite,) = struct.unpack("!H", body[off:off + 2])
    off += 3  # cipher suite + compression method
    if off + 2 > len(body):
        return
    (ext_len,) = struct.unpack("!H", body[off:off + 2]); off += 2
    for etype, edata in _parse_extensions(body[off:off + ext_len]):
        # TLS 1.3 keeps the legacy field at 1.2 and negotiates here instead
        if etype == EXT_SUPPORTED_VERSIONS and len(edata) >= 2:
            (session.server_version,) = struct.unpack("!H", edata[0:2])


def _parse_certificate(body: bytes, session: TlsSession) -> None:
    if len(body) < 3:
        return
    (total,) = struct.unpack("!I", b"\x00" + body[0:3])
    off = 3
    end = min(len(body), 3 + total)
    while off + 3 <= end:
        (clen,) = struct.unpack("!I", b"\x00" + body[off:off + 3])
        der = body[off + 3:off + 3 + clen]
        if len(der) < clen:
            break
        session.certificates.append(der)
        off += 3 + clen


def _sslv2_hello(payload: bytes) -> int | None:
    """Version from an SSLv2-framed hello, if that is what this is."""
    if len(payload) < 5 or not payload[0] & 0x80:
        return None
    msg_type = payload[2]
    if msg_type == 0x01:      # ClientHello: version directly after type
        return struct.unpack("!H", payload[3:5])[0]
    if msg_type == 0x04 and len(payload) >= 7:  # ServerHello
        return struct.unpack("!H", payload[5:7])[0]
    return None


def parse_flow_tls(flow: FlowRecord) -> TlsSession | None:
    """Dissect a flow's two directions into one TlsSession, or None when the
    flow carries no SSL/TLS framing at all."""
    session = TlsSession()
    for payload in (flow.payload_initiator, flow.payload_responder):
        v2 = _sslv2_hello(payload)
        if v2 is not None and v2 < 0x0300:
            session.sslv2 = True
            session.server_version = 0x0002
            return session
    client_records = parse_records(flow.payload_initiator)
    server_records = parse_records(flow.payload_responder)
    if not client_records and not server_records:
        return None
    for msg_type, body in _iter_handshakes(client_records):
        if msg_type == HS_CLIENT_HELLO:
            _parse_client_hello(body, session)
    for msg_type, body in _iter_handshakes(server_records):
        if msg_type == HS_SERVER_HELLO:
            _parse_server_hello(body, session)
            if session.server_record_version is None:
                session.server_record_version = server_records[0].version
        elif msg_type == HS_CERTIFICATE:
            _parse_certificate(body, session)
    for rec in client_records + server_records:
        if rec.content_type == CONTENT_APPDATA:
            session.app_data_records.append(rec.body)
    return session
