"""Certificate fixtures with chosen properties (hash, key size, validity,
self-signing) for audit tests and the MITM fleet."""

from __future__ import annotations

import datetime

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa
from cryptography.x509.oid import NameOID

EPOCH = datetime.datetime(2024, 3, 1, tzinfo=datetime.timezone.utc)

_SHA256_RSA_OID = bytes.fromhex("06092a864886f70d01010b")
_WEAK_RSA_OIDS = {"sha1": bytes.fromhex("06092a864886f70d010105"),
                  "md5": bytes.fromhex("06092a864886f70d010104")}
_WEAK_HASHES = {"sha1": hashes.SHA1, "md5": hashes.MD5}


def _der_len(n: int) -> bytes:
    if n < 0x80:
        return bytes([n])
    raw = n.to_bytes((n.bit_length() + 7) // 8, "big")
    return bytes([0x80 | len(raw)]) + raw


def _resign_weak(cert: x509.Certificate, signer_key, hash_name: str) -> x509.Certificate:
    """Re-sign a sha256 certificate with a legacy hash by DER surgery; the
    x509 builder itself refuses to create sha1/md5 signatures."""
    oid = _WEAK_RSA_OIDS[hash_name]
    tbs = cert.tbs_certificate_bytes.replace(_SHA256_RSA_OID, oid, 1)
    signature = signer_key.sign(tbs, padding.PKCS1v15(), _WEAK_HASHES[hash_name]())
    alg = b"\x30" + _der_len(len(oid) + 2) + oid + b"\x05\x00"
    sig = b"\x03" + _der_len(len(signature) + 1) + b"\x00" + signature
    body = tbs + alg + sig
    return x509.load_der_x509_certificate(b"\x30" + _der_len(len(body)) + body)


def _name(cn: str, org: str = "Fixture") -> x509.Name:
    return x509.Name([x509.NameAttribute(NameOID.ORGANIZATION_NAME, org),
                      x509.NameAttribute(NameOID.COMMON_NAME, cn)])


def make_key(bits: int = 2048):
    return rsa.generate_private_key(public_exponent=65537, key_size=bits)


def make_ca(cn: str = "Fixture Root CA", key=None):
    key = key or make_key()
    name = _name(cn)
    cert = (x509.CertificateBuilder()
            .subject_name(name).issuer_name(name)
            .public_key(key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(EPOCH)
            .not_valid_after(EPOCH + datetime.timedelta(days=3650))
            .add_extension(x509.BasicConstraints(ca=True, path_length=None),
                           critical=True)
            .sign(key, hashes.SHA256()))
    return key, cert


def make_cert(cn: str, ca_key=None, ca_cert=None, *, key_bits: int = 2048,
              hash_name: str = "sha256", days: float = 365,
              self_signed: bool = False, san: list[str] | None = None,
              not_before: datetime.datetime = EPOCH, key=None):
    """Returns (private_key, certificate). Self-signed unless a CA is given."""
    key = key or make_key(key_bits)
    subject = _name(cn)
    if self_signed or ca_cert is None:
        issuer_name, signer = subject, key
    else:
        issuer_name, signer = ca_cert.subject, ca_key
    builder = (x509.CertificateBuilder()
               .subject_name(subject).issuer_name(issuer_name)
               .public_key(key.public_key())
               .serial_number(x509.random_serial_number())
               .not_valid_before(not_before)
               .not_valid_after(not_before + datetime.timedelta(days=days)))
    if san:
        builder = builder.add_extension(
            x509.SubjectAlternativeName([x509.DNSName(d) for d in san]), critical=False)
    cert = builder.sign(signer, hashes.SHA256())
    if hash_name != "sha256":
        cert = _resign_weak(cert, signer, hash_name)
    return key, cert


def der(cert: x509.Certificate) -> bytes:
    return cert.public_bytes(serialization.Encoding.DER)


def pem(cert: x509.Certificate) -> bytes:
    return cert.public_bytes(serialization.Encoding.PEM)


def key_pem(key) -> bytes:
    return key.private_bytes(serialization.Encoding.PEM,
                             serialization.PrivateFormat.PKCS8,
                             serialization.NoEncryption())
