"""Minimal HTTP/1.x header parsing: enough for content-type classification,
header-region scanning, and API extraction from decrypted exchanges."""

from __future__ import annotations

import dataclasses

from .flows import HTTP_METHODS


@dataclasses.dataclass
class HttpMessage:
    kind: str                      # "request" | "response"
    method: str | None
    path: str | None
    status: int | None
    headers: dict[str, str]        # lower-cased names, first value wins
    header_block_len: int          # bytes up to and including the blank line
    body: bytes

    @property
    def content_type(self) -> str | None:
        value = self.headers.get("content-type")
        return value.split(";")[0].strip().lower() if value else None


def parse_http(payload: bytes) -> HttpMessage | None:
    """Parse the first HTTP message at the start of a byte stream."""
    if not payload.startswith(HTTP_METHODS) and not payload.startswith(b"HTTP/1."):
        return None
    end = payload.find(b"\r\n\r\n")
    if end < 0:
        head, body, block_len = payload, b"", len(payload)
    else:
        head, body, block_len = payload[:end], payload[end + 4:], end + 4
    lines = head.split(b"\r\n")
    try:
        start = lines[0].decode("latin-1")
    except UnicodeDecodeError:
        return None
    method = path = None
    status = None
    if start.startswith("HTTP/1."):
        parts = start.split(" ", 2)
        if len(parts) >= 2 and parts[1].isdigit():
            status = int(parts[1])
        kind = "response"
    else:
        parts = start.split(" ")
        if len(parts) < 2:
            return None
        method, path = parts[0], parts[1]
        kind = "request"
    headers: dict[str, str] = {}
    for line in lines[1:]:
        if b":" not in line:
            continue
        name, _, value = line.partition(b":")
        key = name.decode("latin-1").strip().lower()
        headers.setdefault(key, value.decode("latin-1").strip())
    return HttpMessage(kind=kind, method=method, path=path, status=status,
                       headers=headers, header_block_len=block_len, body=body)


def iter_http_messages(stream: bytes, limit: int = 32):
    """Walk consecutive HTTP messages in one direction of a flow."""
    out = []
    offset = 0
    for _ in range(limit):
        msg = parse_http(stream[offset:])
        if msg is None:
            break
        out.append((offset, msg))
        length = msg.headers.get("content-length")
        if length is not None and length.isdigit():
            offset += msg.header_block_len + int(length)
        else:
            break  # without a length we cannot find the next message
        if offset >= len(stream):
            break
    return out
