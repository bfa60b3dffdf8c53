"""Plaintext recovered from accepted forged sessions: extract the APIs a
device spoke and flag sensitive field names. Values are redacted unless the
operator explicitly opts out."""

from __future__ import annotations

import dataclasses
import re

from ..pcapio.http import iter_http_messages
from .classify import MitmObservation, MitmVerdict
from .probe import ProbeSession

DEFAULT_SENSITIVE_PATTERNS = (
    "device_sk", "device_name", "secret", "token", "password", "passwd",
    "api_key", "access_key",
)


@dataclasses.dataclass
class ApiRecord:
    device_id: str
    endpoint: tuple[str, int]
    kind: str                       # "http" | "raw"
    http_method: str | None = None
    path: str | None = None
    header_names: list[str] = dataclasses.field(default_factory=list)
    flagged_fields: list[dict] = dataclasses.field(default_factory=list)
    bytes_up: int = 0
    bytes_down: int = 0


def _redact(value: str) -> str:
    if len(value) <= 2:
        return "*" * len(value)
    return value[0] + "*" * (len(value) - 2) + value[-1]


def _find_fields(text: str, patterns, redact: bool) -> list[dict]:
    hits = []
    for name in patterns:
        # key/value shapes across query strings, JSON, and form bodies
        regex = re.compile(
            rf'["\']?({re.escape(name)})["\']?\s*[=:]\s*["\']?([^"\'&\s,}}]+)',
            re.IGNORECASE)
        for match in regex.finditer(text):
            value = match.group(2)
            hits.append({"name": match.group(1),
                         "value": _redact(value) if redact else value})
    return hits


def decrypt_transcripts(sessions: list[ProbeSession],
                        observations: list[MitmObservation],
                        sensitive_patterns=DEFAULT_SENSITIVE_PATTERNS,
                        redact_values: bool = True) -> list[ApiRecord]:
    """API extraction for sessions that communicated normally under the
    forged chain (the probe terminated those sessions, so it holds their
    plaintext)."""
    normal = {(o.device_id, o.server_endpoint) for o in observations
              if o.verdict == MitmVerdict.COMMUNICATES_NORMALLY}
    records: list[ApiRecord] = []
    for session in sessions:
        if (session.device_id, session.server_endpoint) not in normal:
            continue
        if session.app_records_relayed == 0:
            continue
        up = session.plaintext_device_to_server
        down = session.plaintext_server_to_device
        messages = iter_http_messages(up)
        if not messages:
            records.append(ApiRecord(device_id=session.device_id,
                                     endpoint=session.server_endpoint, kind="raw",
                                     bytes_up=len(up), bytes_down=len(down)))
            continue
        searchable = up.decode("utf-8", errors="replace") + \
            down.decode("utf-8", errors="replace")
        flagged = _find_fields(searchable, sensitive_patterns, redact_values)
        for _offset, msg in messages:
            records.append(ApiRecord(
                device_id=session.device_id, endpoint=session.server_endpoint,
                kind="http", http_method=msg.method, path=msg.path,
                header_names=sorted(msg.headers), flagged_fields=flagged,
                bytes_up=len(up), bytes_down=len(down)))
    return records
