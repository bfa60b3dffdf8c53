"""Static certificate audit: weak algorithms, self-signing, validity windows.

Chains are re-linked by subject/issuer before judgment so a shuffled input
cannot change the self-signed verdict.
"""

from __future__ import annotations

import dataclasses
import enum
from importlib import resources
from pathlib import Path

import yaml
from cryptography import x509
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric import ec, padding, rsa

from .certs import CertificateRecord


class Finding(enum.Enum):
    WEAK_SIGNATURE = "WEAK_SIGNATURE"
    WEAK_KEY = "WEAK_KEY"
    SELF_SIGNED = "SELF_SIGNED"
    EXCESSIVE_VALIDITY = "EXCESSIVE_VALIDITY"
    UNRECOGNIZED_ALGORITHM = "UNRECOGNIZED_ALGORITHM"


@dataclasses.dataclass
class CertificateFinding:
    device_id: str
    phase: str
    endpoint: tuple[str, int]
    finding: Finding
    detail: str                    # cites the triggering field values
    subject: str = ""


@dataclasses.dataclass
class AuditPolicy:
    weak_hashes: tuple[str, ...] = ("md5", "sha1")
    min_rsa_bits: int = 2048
    min_ec_bits: int = 224
    max_validity_days: float = 398.0          # the 13-month ceiling
    trust_store: list[x509.Certificate] = dataclasses.field(default_factory=list)

    @property
    def trusted_subjects(self) -> dict[str, x509.Certificate]:
        return {c.subject.rfc4514_string(): c for c in self.trust_store}


def _load_pem_bundle(text: str) -> list[x509.Certificate]:
    certs = []
    marker = "-----BEGIN CERTIFICATE-----"
    for chunk in text.split(marker)[1:]:
        pem = (marker + chunk.split("-----END CERTIFICATE-----")[0]
               + "-----END CERTIFICATE-----")
        certs.append(x509.load_pem_x509_certificate(pem.encode()))
    return certs


def load_audit_policy(path: str | Path | None = None,
                      trust_store_path: str | Path | None = None) -> AuditPolicy:
    if path is None:
        text = resources.files("iotaudit.data").joinpath("audit_policy.yaml").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    doc = yaml.safe_load(text) or {}
    if trust_store_path is not None:
        bundle = Path(trust_store_path).read_text(encoding="utf-8")
    elif doc.get("trust_store"):
        bundle = Path(doc["trust_store"]).read_text(encoding="utf-8")
    else:
        bundle = resources.files("iotaudit.data").joinpath("pinned_roots.pem").read_text()
    return AuditPolicy(
        weak_hashes=tuple(doc.get("weak_hashes", ("md5", "sha1"))),
        min_rsa_bits=int(doc.get("min_rsa_bits", 2048)),
        min_ec_bits=int(doc.get("min_ec_bits", 224)),
        max_validity_days=float(doc.get("max_validity_days", 398)),
        trust_store=_load_pem_bundle(bundle),
    )


def order_chain(records: list[CertificateRecord]) -> list[CertificateRecord]:
    """Leaf-first re-ordering by issuer links; unlinked certs keep input order."""
    if len(records) <= 1:
        return list(records)
    by_subject = {r.subject: r for r in records}
    issued_subjects = {r.issuer for r in records if r.issuer != r.subject}
    leaves = [r for r in records if r.subject not in issued_subjects]
    start = leaves[0] if leaves else records[0]
    ordered = [start]
    seen = {id(start)}
    current = start
    while current.issuer in by_subject and current.issuer != current.subject:
        nxt = by_subject[current.issuer]
        if id(nxt) in seen:
            break
        ordered.append(nxt)
        seen.add(id(nxt))
        current = nxt
    ordered.extend(r for r in records if id(r) not in seen)
    return ordered


def _verify_signed_by(cert: x509.Certificate, issuer: x509.Certificate) -> bool:
    key = issuer.public_key()
    try:
        if isinstance(key, rsa.RSAPublicKey):
            key.verify(cert.signature, cert.tbs_certificate_bytes,
                       padding.PKCS1v15(), cert.signature_hash_algorithm)
        elif isinstance(key, ec.EllipticCurvePublicKey):
            key.verify(cert.signature, cert.tbs_certificate_bytes,
                       ec.ECDSA(cert.signature_hash_algorithm))
        else:
            return False
        return True
    except (InvalidSignature, ValueError, TypeError):
        return False


def _chain_trusted(ordered: list[CertificateRecord], policy: AuditPolicy) -> bool:
    top = ordered[-1]
    top_cert = x509.load_der_x509_certificate(top.der_bytes)
    trusted = policy.trusted_subjects
    if top.self_signed_subject:
        anchor = trusted.get(top.subject)
        return anchor is not None and anchor.public_key().public_numbers() == \
            top_cert.public_key().public_numbers()
    anchor = trusted.get(top.issuer)
    return anchor is not None and _verify_signed_by(top_cert, anchor)


def audit_certificates(certs: list[CertificateRecord],
                       policy: AuditPolicy) -> list[CertificateFinding]:
    """Every certificate is audited; chains grouped per (device, endpoint)
    decide self-signing once, attributed to the leaf."""
    findings: list[CertificateFinding] = []

    def add(rec, finding, detail):
        findings.append(CertificateFinding(
            device_id=rec.device_id, phase=rec.phase, endpoint=rec.endpoint,
            finding=finding, detail=detail, subject=rec.subject))

    for rec in certs:
        if rec.signature_hash is None:
            add(rec, Finding.UNRECOGNIZED_ALGORITHM,
                f"signature algorithm {rec.signature_algorithm} not recognized")
        elif rec.signature_hash.lower() in policy.weak_hashes:
            add(rec, Finding.WEAK_SIGNATURE,
                f"signature algorithm {rec.signature_algorithm} uses "
                f"{rec.signature_hash}")
        if rec.key_algorithm == "RSA" and rec.key_bits is not None and \
                rec.key_bits < policy.min_rsa_bits:
            add(rec, Finding.WEAK_KEY,
                f"RSA-{rec.key_bits} key below the {policy.min_rsa_bits}-bit floor")
        elif rec.key_algorithm == "EC" and rec.key_bits is not None and \
                rec.key_bits < policy.min_ec_bits:
            add(rec, Finding.WEAK_KEY,
                f"EC-{rec.key_bits} key below the {policy.min_ec_bits}-bit floor")
        # the 13-month ceiling is a server-certificate baseline; CA certs
        # legitimately carry decade-long validity
        if rec.chain_position == "leaf" and rec.validity_days > policy.max_validity_days:
            add(rec, Finding.EXCESSIVE_VALIDITY,
                f"validity {rec.not_before.date()} to {rec.not_after.date()} "
                f"({rec.validity_days:.0f} days) exceeds "
                f"{policy.max_validity_days:.0f} days")

    chains: dict[tuple[str, str, tuple[str, int]], list[CertificateRecord]] = {}
    for rec in certs:
        chains.setdefault((rec.device_id, rec.phase, rec.endpoint), []).append(rec)
    for group in chains.values():
        ordered = order_chain(group)
        leaf = ordered[0]
        if leaf.self_signed_subject:
            add(leaf, Finding.SELF_SIGNED,
                f"leaf subject equals issuer ({leaf.subject})")
        elif not _chain_trusted(ordered, policy):
            add(leaf, Finding.SELF_SIGNED,
                f"chain terminates at {ordered[-1].issuer!r}, absent from the "
                "configured trust store")
    return findings
