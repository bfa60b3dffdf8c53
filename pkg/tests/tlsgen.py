"""Hand-built TLS handshake bytes for parser fixtures (record layout per the
wire format, independent of the package's dissector)."""

from __future__ import annotations

import struct


def record(content_type: int, body: bytes, version: int = 0x0303) -> bytes:
    return struct.pack("!BHH", content_type, version, len(body)) + body


def handshake(msg_type: int, body: bytes) -> bytes:
    return struct.pack("!B", msg_type) + len(body).to_bytes(3, "big") + body


def extension(etype: int, data: bytes) -> bytes:
    return struct.pack("!HH", etype, len(data)) + data


def server_hello(version: int = 0x0303, cipher: int = 0xC02F,
                 supported_version: int | None = None,
                 record_version: int | None = None) -> bytes:
    exts = b""
    if supported_version is not None:
        exts += extension(43, struct.pack("!H", supported_version))
    body = (struct.pack("!H", version) + b"\x11" * 32 + b"\x00"  # random, empty sid
            + struct.pack("!HB", cipher, 0)
            + struct.pack("!H", len(exts)) + exts)
    return record(22, handshake(2, body),
                  version=record_version if record_version is not None else version)


def client_hello(version: int = 0x0303, sni: str | None = None,
                 ciphers: tuple[int, ...] = (0xC02F, 0x009C, 0x002F)) -> bytes:
    exts = b""
    if sni is not None:
        name = sni.encode()
        entry = struct.pack("!BH", 0, len(name)) + name
        exts += extension(0, struct.pack("!H", len(entry)) + entry)
    suites = b"".join(struct.pack("!H", c) for c in ciphers)
    body = (struct.pack("!H", version) + b"\x22" * 32 + b"\x00"
            + struct.pack("!H", len(suites)) + suites
            + b"\x01\x00"
            + struct.pack("!H", len(exts)) + exts)
    return record(22, handshake(1, body), version=0x0301)


def certificate_message(ders: list[bytes], version: int = 0x0303) -> bytes:
    entries = b"".join(len(d).to_bytes(3, "big") + d for d in ders)
    body = len(entries).to_bytes(3, "big") + entries
    return record(22, handshake(11, body), version=version)


def app_data(body: bytes, version: int = 0x0303) -> bytes:
    return record(23, body, version=version)


def sslv2_client_hello() -> bytes:
    body = struct.pack("!BHHHH", 0x01, 0x0002, 3, 0, 16) + b"\x01\x00\x80" + b"c" * 16
    return struct.pack("!H", 0x8000 | len(body)) + body
