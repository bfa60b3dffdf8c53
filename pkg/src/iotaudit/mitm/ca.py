"""The local forging CA: re-signs upstream leaf certificates under a root the
device has no reason to trust. A device that accepts the forged chain is not
validating certificates."""

from __future__ import annotations

import datetime
import threading
from pathlib import Path

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import rsa
from cryptography.x509.oid import ExtensionOID, NameOID


def _write_key_pem(path: Path, key) -> None:
    path.write_bytes(key.private_bytes(serialization.Encoding.PEM,
                                       serialization.PrivateFormat.PKCS8,
                                       serialization.NoEncryption()))


class LocalCa:
    """CA material lives in a state directory; regenerated on demand."""

    def __init__(self, state_dir: str | Path):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.key_path = self.state_dir / "local_ca_key.pem"
        self.cert_path = self.state_dir / "local_ca.pem"
        self._leaf_cache: dict[tuple[str, bytes], tuple[Path, Path]] = {}
        self._lock = threading.Lock()
        self._load_or_create()

    def _load_or_create(self) -> None:
        if self.key_path.exists() and self.cert_path.exists():
            self.key = serialization.load_pem_private_key(
                self.key_path.read_bytes(), password=None)
            self.cert = x509.load_pem_x509_certificate(self.cert_path.read_bytes())
            return
        self.key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
        name = x509.Name([
            x509.NameAttribute(NameOID.ORGANIZATION_NAME, "IoT Audit Probe"),
            x509.NameAttribute(NameOID.COMMON_NAME, "IoT Audit Local CA"),
        ])
        now = datetime.datetime.now(datetime.timezone.utc)
        self.cert = (x509.CertificateBuilder()
                     .subject_name(name).issuer_name(name)
                     .public_key(self.key.public_key())
                     .serial_number(x509.random_serial_number())
                     .not_valid_before(now - datetime.timedelta(days=1))
                     .not_valid_after(now + datetime.timedelta(days=3650))
                     .add_extension(x509.BasicConstraints(ca=True, path_length=None),
                                    critical=True)
                     .sign(self.key, hashes.SHA256()))
        _write_key_pem(self.key_path, self.key)
        self.cert_path.write_bytes(self.cert.public_bytes(serialization.Encoding.PEM))

    def forge_chain(self, host: str, upstream_leaf_der: bytes) -> tuple[Path, Path]:
        """(chain_pem_path, key_pem_path) for a leaf cloning the upstream
        subject and SAN set, signed by the local CA. Cached per
        (host, upstream-leaf fingerprint); the genuine chain is never included."""
        upstream = x509.load_der_x509_certificate(upstream_leaf_der)
        fingerprint = upstream.fingerprint(hashes.SHA256())
        cache_key = (host, fingerprint)
        with self._lock:
            cached = self._leaf_cache.get(cache_key)
            if cached is not None:
                return cached
            leaf_key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
            now = datetime.datetime.now(datetime.timezone.utc)
            builder = (x509.CertificateBuilder()
                       .subject_name(upstream.subject)
                       .issuer_name(self.cert.subject)
                       .public_key(leaf_key.public_key())
                       .serial_number(x509.random_serial_number())
                       .not_valid_before(now - datetime.timedelta(days=1))
                       .not_valid_after(now + datetime.timedelta(days=397)))
            try:
                san = upstream.extensions.get_extension_for_oid(
                    ExtensionOID.SUBJECT_ALTERNATIVE_NAME)
                builder = builder.add_extension(san.value, critical=san.critical)
            except x509.ExtensionNotFound:
                builder = builder.add_extension(
                    x509.SubjectAlternativeName([x509.DNSName(host)]), critical=False)
            leaf = builder.sign(self.key, hashes.SHA256())

            tag = f"{host}_{fingerprint.hex()[:12]}".replace("*", "_").replace("/", "_")
            chain_path = self.state_dir / f"forged_{tag}.pem"
            key_path = self.state_dir / f"forged_{tag}_key.pem"
            chain_path.write_bytes(leaf.public_bytes(serialization.Encoding.PEM)
                                   + self.cert.public_bytes(serialization.Encoding.PEM))
            _write_key_pem(key_path, leaf_key)
            self._leaf_cache[cache_key] = (chain_path, key_path)
            return chain_path, key_path
