"""Simulated device fleet: in-process upstream servers and scripted clients
with chosen validation behaviors, so the whole probe is testable with no
hardware and no privileged networking.

Behaviors:
  strict        validates against the pinned public store -> unknown_ca alert
  naive         no validation; speaks its HTTP script through the forged session
  close_notify  handshakes, then closes orderly without application data
  reconnect     abandons the handshake and redials (default 3 attempts)
  silent        abandons one handshake, then goes quiet
  alert:<code>  sends the given fatal alert after the server's first flight
Server-side behaviors (per logical server): normal | untrusted | unreachable.
"""

from __future__ import annotations

import dataclasses
import datetime
import logging
import socket
import ssl
import struct
import threading
import time
from importlib import resources
from pathlib import Path

import yaml
from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import rsa
from cryptography.x509.oid import NameOID

from .classify import MitmObservation, classify_session, verdict_table
from .probe import ProbeResult, ProbeServer, RedirectRule, collate_sessions

logger = logging.getLogger(__name__)

DEFAULT_HTTP_SCRIPT = (b"GET /v1/status HTTP/1.1\r\nHost: {host}\r\n"
                       b"Connection: close\r\n\r\n")


# -- fleet PKI ----------------------------------------------------------------

def _self_signed_ca(cn: str):
    key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    name = x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, cn)])
    now = datetime.datetime.now(datetime.timezone.utc)
    cert = (x509.CertificateBuilder()
            .subject_name(name).issuer_name(name)
            .public_key(key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(now - datetime.timedelta(days=1))
            .not_valid_after(now + datetime.timedelta(days=365))
            .add_extension(x509.BasicConstraints(ca=True, path_length=None),
                           critical=True)
            .sign(key, hashes.SHA256()))
    return key, cert


def _server_cert(hostname: str, ca_key, ca_cert):
    key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    now = datetime.datetime.now(datetime.timezone.utc)
    cert = (x509.CertificateBuilder()
            .subject_name(x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, hostname)]))
            .issuer_name(ca_cert.subject)
            .public_key(key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(now - datetime.timedelta(days=1))
            .not_valid_after(now + datetime.timedelta(days=90))
            .add_extension(x509.SubjectAlternativeName([x509.DNSName(hostname)]),
                           critical=False)
            .sign(ca_key, hashes.SHA256()))
    return key, cert


def _write_pem(path: Path, *objects) -> Path:
    blob = b""
    for obj in objects:
        if hasattr(obj, "private_bytes"):
            blob += obj.private_bytes(serialization.Encoding.PEM,
                                      serialization.PrivateFormat.PKCS8,
                                      serialization.NoEncryption())
        else:
            blob += obj.public_bytes(serialization.Encoding.PEM)
    path.write_bytes(blob)
    return path


# -- raw TLS bytes for the alert-sender clients --------------------------------

def build_client_hello(sni: str) -> bytes:
    """A TLS 1.2 ClientHello complete enough for OpenSSL to answer."""
    def ext(etype: int, data: bytes) -> bytes:
        return struct.pack("!HH", etype, len(data)) + data

    name = sni.encode()
    sni_entry = struct.pack("!BH", 0, len(name)) + name
    extensions = (
        ext(0, struct.pack("!H", len(sni_entry)) + sni_entry)
        + ext(10, struct.pack("!HHH", 4, 0x001D, 0x0017))        # groups
        + ext(11, b"\x01\x00")                                   # point formats
        + ext(13, struct.pack("!HHHHH", 8, 0x0804, 0x0401, 0x0503, 0x0403))
    )
    suites = struct.pack("!HHHH", 0xC02F, 0xC030, 0x009C, 0x002F)
    body = (struct.pack("!H", 0x0303) + bytes(range(32)) + b"\x00"
            + struct.pack("!H", len(suites)) + suites
            + b"\x01\x00"
            + struct.pack("!H", len(extensions)) + extensions)
    handshake = b"\x01" + len(body).to_bytes(3, "big") + body
    return struct.pack("!BHH", 0x16, 0x0301, len(handshake)) + handshake


def fatal_alert(code: int) -> bytes:
    return struct.pack("!BHHBB", 0x15, 0x0303, 2, 2, code)


# -- spec ----------------------------------------------------------------------

@dataclasses.dataclass
class FleetDeviceSpec:
    device_id: str
    behavior: str                   # see module docstring
    servers: list[str]
    attempts: int = 3               # for the reconnect behavior
    http_script: bytes = DEFAULT_HTTP_SCRIPT


@dataclasses.dataclass
class FleetSpec:
    devices: list[FleetDeviceSpec]
    server_behaviors: dict[str, str] = dataclasses.field(default_factory=dict)

    @property
    def server_names(self) -> list[str]:
        names = {s for d in self.devices for s in d.servers}
        return sorted(names)


def load_fleet_spec(path: str | Path) -> FleetSpec:
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    devices = [FleetDeviceSpec(device_id=str(d["device_id"]),
                               behavior=str(d["behavior"]),
                               servers=[str(s) for s in d["servers"]],
                               attempts=int(d.get("attempts", 3)))
               for d in doc.get("devices", [])]
    return FleetSpec(devices=devices,
                     server_behaviors={str(k): str(v) for k, v in
                                       (doc.get("server_behaviors") or {}).items()})


# -- upstream servers ------------------------------------------------------------

class _UpstreamServer:
    """A genuine TLS server: completes handshakes and answers HTTP with a
    canned response that includes the fields the API-extraction tests expect."""

    RESPONSE_BODY = b'{"device_name":"demo-cam","device_sk":"sk-0123456789abcdef"}'

    def __init__(self, hostname: str, cert_path: Path, key_path: Path):
        self.hostname = hostname
        self._ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
        self._ctx.load_cert_chain(str(cert_path), str(key_path))
        self._ctx.set_ciphers("DEFAULT:@SECLEVEL=1")
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind(("127.0.0.1", 0))
        self._sock.listen(16)
        self._sock.settimeout(0.2)
        self.addr = self._sock.getsockname()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._serve, daemon=True,
                                        name=f"upstream-{hostname}")
        self._thread.start()

    def _serve(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            threading.Thread(target=self._handle, args=(conn,), daemon=True).start()

    def _handle(self, conn: socket.socket) -> None:
        conn.settimeout(5)
        try:
            tls = self._ctx.wrap_socket(conn, server_side=True)
        except (ssl.SSLError, OSError):
            conn.close()
            return
        try:
            request = tls.recv(65536)
            if request:
                body = self.RESPONSE_BODY
                tls.sendall(b"HTTP/1.1 200 OK\r\nContent-Type: application/json\r\n"
                            b"Content-Length: " + str(len(body)).encode()
                            + b"\r\nConnection: close\r\n\r\n" + body)
        except (ssl.SSLError, OSError):
            pass
        finally:
            try:
                tls.close()
            except OSError:
                pass

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2)
        self._sock.close()


# -- scripted clients -------------------------------------------------------------

def _pinned_store_path(state_dir: Path) -> Path:
    target = state_dir / "pinned_roots.pem"
    if not target.exists():
        text = resources.files("iotaudit.data").joinpath("pinned_roots.pem").read_text()
        target.write_text(text)
    return target


def _run_device(spec: FleetDeviceSpec, targets: list[tuple[str, tuple[str, int]]],
                pinned_store: Path) -> None:
    for hostname, addr in targets:
        behavior = spec.behavior
        try:
            if behavior == "strict":
                ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
                ctx.load_verify_locations(str(pinned_store))
                try:
                    with socket.create_connection(addr, timeout=5) as raw:
                        with ctx.wrap_socket(raw, server_hostname=hostname):
                            pass
                except ssl.SSLCertVerificationError:
                    pass  # exactly the point: the forged chain must not verify
            elif behavior == "naive":
                ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
                ctx.check_hostname = False
                ctx.verify_mode = ssl.CERT_NONE
                with socket.create_connection(addr, timeout=5) as raw:
                    with ctx.wrap_socket(raw, server_hostname=hostname) as tls:
                        tls.sendall(spec.http_script.replace(b"{host}",
                                                             hostname.encode()))
                        while tls.recv(16384):
                            pass
            elif behavior == "close_notify":
                ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
                ctx.check_hostname = False
                ctx.verify_mode = ssl.CERT_NONE
                with socket.create_connection(addr, timeout=5) as raw:
                    tls = ctx.wrap_socket(raw, server_hostname=hostname)
                    tls.unwrap()  # close_notify with zero application data
            elif behavior == "reconnect":
                for _ in range(spec.attempts):
                    with socket.create_connection(addr, timeout=5) as raw:
                        raw.sendall(build_client_hello(hostname))
                        raw.settimeout(2)
                        try:
                            raw.recv(4096)
                        except socket.timeout:
                            pass
                        # hard close, no alert
                    time.sleep(0.05)
            elif behavior == "silent":
                with socket.create_connection(addr, timeout=5) as raw:
                    raw.sendall(build_client_hello(hostname))
                    raw.settimeout(2)
                    try:
                        raw.recv(4096)
                    except socket.timeout:
                        pass
            elif behavior.startswith("alert:"):
                code = int(behavior.split(":", 1)[1])
                with socket.create_connection(addr, timeout=5) as raw:
                    raw.sendall(build_client_hello(hostname))
                    raw.settimeout(2)
                    try:
                        raw.recv(65536)
                    except socket.timeout:
                        pass
                    raw.sendall(fatal_alert(code))
                    time.sleep(0.05)
            else:
                raise ValueError(f"unknown fleet behavior {behavior!r}")
        except (OSError, ssl.SSLError) as exc:
            logger.debug("device %s against %s: %s", spec.device_id, hostname, exc)
        time.sleep(0.02)


# -- runner ------------------------------------------------------------------------

@dataclasses.dataclass
class FleetResult:
    probe: ProbeResult
    observations: list[MitmObservation]
    table: list


class SimulatedFleet:
    def __init__(self, spec: FleetSpec, state_dir: str | Path):
        self.spec = spec
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)

    def run(self) -> FleetResult:
        ca_key, ca_cert = _self_signed_ca("Fleet Upstream CA")
        rogue_key, rogue_cert = _self_signed_ca("Rogue Upstream CA")
        trust_path = _write_pem(self.state_dir / "fleet_upstream_ca.pem", ca_cert)
        pinned = _pinned_store_path(self.state_dir)

        upstreams: dict[str, _UpstreamServer] = {}
        unreachable: dict[str, tuple[str, int]] = {}
        for name in self.spec.server_names:
            behavior = self.spec.server_behaviors.get(name, "normal")
            if behavior == "unreachable":
                probe_sock = socket.socket()
                probe_sock.bind(("127.0.0.1", 0))
                unreachable[name] = probe_sock.getsockname()
                probe_sock.close()  # nothing listens there afterwards
                continue
            signer = (rogue_key, rogue_cert) if behavior == "untrusted" else (ca_key, ca_cert)
            key, cert = _server_cert(name, *signer)
            cert_path = _write_pem(self.state_dir / f"up_{name}.pem", cert)
            key_path = _write_pem(self.state_dir / f"up_{name}_key.pem", key)
            upstreams[name] = _UpstreamServer(name, cert_path, key_path)

        rules: list[RedirectRule] = []
        rule_targets: dict[str, list[tuple[str, tuple[str, int]]]] = {}
        for device in self.spec.devices:
            rule_targets[device.device_id] = []
            for server in device.servers:
                addr = upstreams[server].addr if server in upstreams else unreachable[server]
                rules.append(RedirectRule(device_id=device.device_id,
                                          device_addr="127.0.0.1", ports=(443,),
                                          upstream_host=server, upstream_addr=addr))

        probe = ProbeServer(rules, self.state_dir, upstream_trust_store=trust_path,
                            io_timeout=2.0)
        started = time.time()
        probe.start()
        for i, rule in enumerate(rules):
            rule_targets[rule.device_id].append((rule.upstream_host,
                                                 probe.listen_addr(i)))
        try:
            threads = []
            for device in self.spec.devices:
                t = threading.Thread(target=_run_device,
                                     args=(device, rule_targets[device.device_id],
                                           pinned),
                                     daemon=True, name=f"device-{device.device_id}")
                t.start()
                threads.append(t)
            for t in threads:
                t.join(timeout=60)
            time.sleep(0.3)  # let the last handlers write their transcripts
        finally:
            probe.stop()
            for server in upstreams.values():
                server.stop()

        collate_sessions(probe.sessions)
        observations = [classify_session(s) for s in probe.sessions if s.tls]
        result = ProbeResult(sessions=probe.sessions,
                             device_status={d.device_id: "ok" for d in self.spec.devices},
                             started=started, ended=time.time())
        return FleetResult(probe=result, observations=observations,
                           table=verdict_table(observations))
