"""Certificate extraction from TLS 1.2 handshakes, PSK-model tagging, and the
CERT_OPAQUE tally for TLS 1.3 sessions (which encrypt their certificates)."""

from __future__ import annotations

import base64
import dataclasses
import datetime
import logging

from cryptography import x509
from cryptography.hazmat.primitives.asymmetric import dsa, ec, rsa

from ..pcapio.flows import FlowRecord
from ..pcapio.tls import parse_flow_tls

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class CertificateRecord:
    der_bytes: bytes
    subject: str
    issuer: str
    signature_algorithm: str          # OID name, e.g. sha1WithRSAEncryption
    signature_hash: str | None        # e.g. sha1; None when unrecognized
    key_algorithm: str                # RSA | EC | DSA | OTHER
    key_bits: int | None
    not_before: datetime.datetime
    not_after: datetime.datetime
    chain_position: str               # leaf | intermediate | root
    device_id: str = ""
    phase: str = ""
    endpoint: tuple[str, int] = ("", 0)
    sni: str | None = None

    @property
    def self_signed_subject(self) -> bool:
        return self.subject == self.issuer

    @property
    def validity_days(self) -> float:
        return (self.not_after - self.not_before).total_seconds() / 86400.0

    @property
    def der_base64(self) -> str:
        return base64.b64encode(self.der_bytes).decode("ascii")


@dataclasses.dataclass
class TlsFlowInput:
    device_id: str
    phase: str
    flow: FlowRecord


@dataclasses.dataclass
class ExtractionResult:
    records: list[CertificateRecord]
    psk_devices: set[str]             # devices whose TLS 1.2 sessions used PSK suites
    cert_opaque: int                  # TLS 1.3 sessions: certificates not recoverable
    warnings: list[str]


def record_from_der(der: bytes, position: str = "leaf", device_id: str = "",
                    phase: str = "", endpoint: tuple[str, int] = ("", 0),
                    sni: str | None = None) -> CertificateRecord:
    cert = x509.load_der_x509_certificate(der)
    key = cert.public_key()
    if isinstance(key, rsa.RSAPublicKey):
        algo, bits = "RSA", key.key_size
    elif isinstance(key, ec.EllipticCurvePublicKey):
        algo, bits = "EC", key.curve.key_size
    elif isinstance(key, dsa.DSAPublicKey):
        algo, bits = "DSA", key.key_size
    else:
        algo, bits = "OTHER", None
    try:
        sig_hash = cert.signature_hash_algorithm.name if cert.signature_hash_algorithm else None
    except Exception:  # unrecognized/unsupported algorithms stay auditable
        sig_hash = None
    return CertificateRecord(
        der_bytes=der,
        subject=cert.subject.rfc4514_string(),
        issuer=cert.issuer.rfc4514_string(),
        signature_algorithm=getattr(cert.signature_algorithm_oid, "_name",
                                    cert.signature_algorithm_oid.dotted_string),
        signature_hash=sig_hash,
        key_algorithm=algo,
        key_bits=bits,
        not_before=cert.not_valid_before_utc,
        not_after=cert.not_valid_after_utc,
        chain_position=position,
        device_id=device_id, phase=phase, endpoint=endpoint, sni=sni,
    )


def _position(index: int, count: int, subject_is_issuer: bool) -> str:
    if index == 0:
        return "leaf"
    if index == count - 1 and subject_is_issuer:
        return "root"
    return "intermediate"


def extract_certificates(inputs: list[TlsFlowInput],
                         device_ips: dict[str, str] | None = None
                         ) -> ExtractionResult:
    records: list[CertificateRecord] = []
    psk_devices: set[str] = set()
    opaque = 0
    warnings: list[str] = []
    for item in inputs:
        session = parse_flow_tls(item.flow)
        if session is None or not session.saw_server_hello:
            continue
        if session.server_version == 0x0304:
            opaque += 1
            continue
        ips = {device_ips[item.device_id]} if device_ips and item.device_id in device_ips else set()
        ip, port = item.flow.remote_endpoint(ips)
        endpoint = (ip, port or 0)
        if not session.certificates:
            if session.negotiated_psk:
                psk_devices.add(item.device_id)
            continue
        ders = session.certificates
        chain: list[CertificateRecord] = []
        try:
            for i, der in enumerate(ders):
                cert = x509.load_der_x509_certificate(der)
                chain.append(record_from_der(
                    der,
                    position=_position(i, len(ders), cert.subject == cert.issuer),
                    device_id=item.device_id, phase=item.phase,
                    endpoint=endpoint, sni=session.sni))
        except ValueError as exc:
            warnings.append(f"{item.device_id} {endpoint[0]}:{endpoint[1]}: "
                            f"undecodable certificate chain ({exc})")
            continue
        records.extend(chain)
    return ExtractionResult(records=records, psk_devices=psk_devices,
                            cert_opaque=opaque, warnings=warnings)
