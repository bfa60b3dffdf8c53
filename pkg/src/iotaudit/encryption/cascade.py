"""The flow classification cascade and the per-phase encryption heatmap.

Stage order is fixed: HTTP content-type, SSL application-record entropy,
DNSKEY presence, magic numbers, then bare entropy thresholds. Exactly one
stage decides each flow.
"""

from __future__ import annotations

import dataclasses
import enum

from ..pcapio.dnsmap import extract_dns_messages
from ..pcapio.flows import FlowRecord
from ..pcapio.http import parse_http
from ..pcapio.tls import CONTENT_APPDATA, parse_records
from .entropy import payload_entropy
from .magic import MagicNumberTable

ENTROPY_WINDOW = 16 * 1024   # bytes per direction; estimates converge well before
SHORT_PAYLOAD_FLOOR = 64     # below this the estimator is noise


class Verdict(enum.Enum):
    ENCRYPTED = "encrypted"
    TEXT = "text"
    MEDIA = "media"
    COMPRESSED = "compressed"
    UNKNOWN = "unknown"


class Rule(enum.Enum):
    HTTP_CONTENT_TYPE = "HTTP_CONTENT_TYPE"
    SSL_ENTROPY = "SSL_ENTROPY"
    DNSKEY = "DNSKEY"
    MAGIC_NUMBER = "MAGIC_NUMBER"
    ENTROPY_THRESHOLD = "ENTROPY_THRESHOLD"


UNENCRYPTED_VERDICTS = {Verdict.TEXT, Verdict.MEDIA, Verdict.COMPRESSED}


@dataclasses.dataclass(frozen=True)
class Thresholds:
    ssl: float = 0.8        # application-record entropy above which TLS counts as encrypted
    encrypted: float = 0.9  # bare-payload entropy above which a flow is encrypted
    text: float = 0.4       # below which it is text


@dataclasses.dataclass
class TrafficClassification:
    flow_key: str
    verdict: Verdict
    rule: Rule
    entropy: float | None = None
    detail: str = ""


_TEXT_TYPES = {"application/json", "application/xml", "application/javascript",
               "application/x-www-form-urlencoded", "application/xhtml+xml"}
_COMPRESSED_TYPES = {"application/zip", "application/gzip", "application/x-gzip",
                     "application/x-compressed", "application/x-bzip2",
                     "application/x-7z-compressed", "application/x-rar-compressed",
                     "application/zstd"}
_MEDIA_PREFIXES = ("image/", "audio/", "video/", "font/")


def _content_type_verdict(content_type: str) -> Verdict | None:
    if content_type.startswith("text/") or content_type in _TEXT_TYPES or \
            content_type.endswith(("+json", "+xml")):
        return Verdict.TEXT
    if content_type in _COMPRESSED_TYPES:
        return Verdict.COMPRESSED
    if content_type.startswith(_MEDIA_PREFIXES):
        return Verdict.MEDIA
    return None


def _entropy_sample(flow: FlowRecord) -> bytes:
    return flow.payload_initiator[:ENTROPY_WINDOW] + flow.payload_responder[:ENTROPY_WINDOW]


def classify_flow(flow: FlowRecord, magic: MagicNumberTable,
                  thresholds: Thresholds = Thresholds()) -> TrafficClassification:
    """Classify one flow with at least one byte of application payload."""
    key = str(flow.key)

    # 1. HTTP with a declared content type (responses first: they carry the body)
    if "HTTP" in flow.protocol_tags:
        for payload in (flow.payload_responder, flow.payload_initiator):
            msg = parse_http(payload)
            if msg is None or msg.content_type is None:
                continue
            verdict = _content_type_verdict(msg.content_type)
            if verdict is not None:
                return TrafficClassification(key, verdict, Rule.HTTP_CONTENT_TYPE,
                                             detail=msg.content_type)

    # 2. SSL/TLS: entropy of application-data records only; handshake records
    #    (certificates are structured plaintext) would drag the estimate down
    if flow.protocol_tags & {"TLS", "SSLV2"}:
        app = b"".join(
            rec.body
            for payload in (flow.payload_initiator, flow.payload_responder)
            for rec in parse_records(payload)
            if rec.content_type == CONTENT_APPDATA)[:2 * ENTROPY_WINDOW]
        if app:
            ent = payload_entropy(app)
            if ent > thresholds.ssl:
                return TrafficClassification(key, Verdict.ENCRYPTED, Rule.SSL_ENTROPY,
                                             entropy=ent)

    # 3. DNS carrying a DNSKEY resource record (kept verbatim from the method
    #    this reproduces; see README for the caveat)
    if "DNS" in flow.protocol_tags:
        messages, _bad = extract_dns_messages(flow)
        if any(m.has_dnskey for m in messages):
            return TrafficClassification(key, Verdict.ENCRYPTED, Rule.DNSKEY)

    # 4. Byte signatures, either direction, longest match wins
    matches = [m for m in (magic.match(flow.payload_initiator),
                           magic.match(flow.payload_responder)) if m]
    if matches:
        best = max(matches, key=lambda m: len(m.prefix))
        verdict = Verdict.COMPRESSED if best.verdict_class == "compressed" else Verdict.MEDIA
        return TrafficClassification(key, verdict, Rule.MAGIC_NUMBER, detail=best.name)

    # 5. Bare entropy thresholds over the sampled payload
    sample = _entropy_sample(flow)
    ent = payload_entropy(sample)
    if len(sample) < SHORT_PAYLOAD_FLOOR:
        return TrafficClassification(key, Verdict.UNKNOWN, Rule.ENTROPY_THRESHOLD,
                                     entropy=ent, detail="short payload")
    if ent > thresholds.encrypted:
        verdict = Verdict.ENCRYPTED
    elif ent < thresholds.text:
        verdict = Verdict.TEXT
    else:
        verdict = Verdict.UNKNOWN
    return TrafficClassification(key, verdict, Rule.ENTROPY_THRESHOLD, entropy=ent)


def classify_flows(flows, magic: MagicNumberTable,
                   thresholds: Thresholds = Thresholds()):
    """Classify every flow with payload; returns (classifications, zero-payload count)."""
    out: list[TrafficClassification] = []
    skipped = 0
    for flow in flows:
        if flow.payload_bytes_total == 0:
            skipped += 1
            continue
        out.append(classify_flow(flow, magic, thresholds))
    return out, skipped


@dataclasses.dataclass
class FlowTraffic:
    """One classified flow's contribution to the heatmap."""
    device_id: str
    category: str
    phase: str
    verdict: Verdict
    wire_bytes: int


def encryption_heatmap(traffic: list[FlowTraffic]) -> dict:
    """(category, phase) -> {encrypted, unknown, unencrypted} percentages.

    Shares are byte-weighted within a device, then averaged with equal device
    weight across the category. Cells with no classified traffic are None.
    """
    per_device: dict[tuple[str, str, str], dict[str, int]] = {}
    for item in traffic:
        cell = per_device.setdefault((item.category, item.phase, item.device_id),
                                     {"encrypted": 0, "unknown": 0, "unencrypted": 0})
        if item.verdict == Verdict.ENCRYPTED:
            cell["encrypted"] += item.wire_bytes
        elif item.verdict == Verdict.UNKNOWN:
            cell["unknown"] += item.wire_bytes
        else:
            cell["unencrypted"] += item.wire_bytes

    grouped: dict[tuple[str, str], list[dict[str, float]]] = {}
    for (category, phase, _device), counts in sorted(per_device.items()):
        total = sum(counts.values())
        if total == 0:
            continue
        grouped.setdefault((category, phase), []).append(
            {k: v / total for k, v in counts.items()})

    heatmap: dict[tuple[str, str], dict[str, float] | None] = {}
    for cell, shares in grouped.items():
        n = len(shares)
        heatmap[cell] = {k: 100.0 * sum(s[k] for s in shares) / n
                         for k in ("encrypted", "unknown", "unencrypted")}
    return heatmap
