"""Transparent TLS interception: terminate the device's connection under a
forged chain, relay plaintext to the genuine server, transcribe everything.

Interception is by destination (rule), not an explicit proxy, because IoT
devices cannot be configured with proxy settings. Each redirect rule gets its
own listener; a gateway DNAT (or the simulated fleet) steers device flows at
the right listener.
"""

from __future__ import annotations

import dataclasses
import logging
import select
import socket
import ssl
import threading
import time
from pathlib import Path

import yaml

from .ca import LocalCa

logger = logging.getLogger(__name__)

PLAINTEXT_CAP = 256 * 1024
RECONNECT_WINDOW = 30.0      # seconds between abandonment and redial
RECONNECT_MIN_COUNT = 2

# OpenSSL reason fragments -> TLS alert (code, name)
_ALERT_REASONS = {
    "UNKNOWN_CA": (48, "unknown_ca"),
    "BAD_CERTIFICATE": (42, "bad_certificate"),
    "CERTIFICATE_UNKNOWN": (46, "certificate_unknown"),
    "DECRYPT_ERROR": (51, "decrypt_error"),
    "DECODE_ERROR": (50, "decode_error"),
    "ILLEGAL_PARAMETER": (47, "illegal_parameter"),
}


@dataclasses.dataclass
class RedirectRule:
    device_id: str
    device_addr: str                 # device IP or MAC (operator bookkeeping)
    ports: tuple[int, ...]           # intercepted destination ports
    upstream_host: str               # certificate identity / SNI of the server
    upstream_addr: tuple[str, int]   # where the genuine server is reached


def load_redirect_rules(path: str | Path) -> list[RedirectRule]:
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    rules = []
    for entry in doc.get("rules", []):
        rules.append(RedirectRule(
            device_id=str(entry["device_id"]),
            device_addr=str(entry.get("device_addr", "")),
            ports=tuple(int(p) for p in entry.get("ports", [443])),
            upstream_host=str(entry["upstream_host"]),
            upstream_addr=(str(entry["upstream_addr"][0]), int(entry["upstream_addr"][1])),
        ))
    return rules


@dataclasses.dataclass
class TranscriptEvent:
    t: float
    kind: str
    detail: dict = dataclasses.field(default_factory=dict)


@dataclasses.dataclass
class ProbeSession:
    device_id: str
    server_endpoint: tuple[str, int]
    start: float
    end: float = 0.0
    events: list[TranscriptEvent] = dataclasses.field(default_factory=list)
    tls: bool = True
    alert_code: int | None = None
    alert_name: str | None = None
    handshake_started: bool = False
    handshake_complete: bool = False
    upstream_ok: bool = True
    app_records_relayed: int = 0
    bytes_device_to_server: int = 0
    bytes_server_to_device: int = 0
    bytes_sent_upstream: int = 0
    plaintext_device_to_server: bytes = b""
    plaintext_server_to_device: bytes = b""
    device_closed_midstream: bool = False
    # collation fills these after the probe run
    redial_count: int = 0
    device_traffic_after: bool = False

    def log(self, kind: str, **detail) -> None:
        self.events.append(TranscriptEvent(t=time.time(), kind=kind, detail=detail))

    def record_alert(self, code: int, name: str) -> None:
        self.alert_code, self.alert_name = code, name
        self.log("alert", code=code, name=name)

    def excerpt(self, limit: int = 6) -> str:
        return "; ".join(f"{e.kind}{e.detail or ''}" for e in self.events[:limit])


@dataclasses.dataclass
class ProbeResult:
    sessions: list[ProbeSession]
    device_status: dict[str, str]     # device_id -> "ok" | "NO_TRAFFIC"
    started: float
    ended: float


def _alert_from_error(exc: ssl.SSLError) -> tuple[int, str] | None:
    text = " ".join(str(a) for a in exc.args).upper().replace(" ", "_")
    for fragment, alert in _ALERT_REASONS.items():
        if fragment in text:
            return alert
    return None


class ProbeServer:
    """One listener per redirect rule; every accepted connection becomes a
    transcribed session."""

    def __init__(self, rules: list[RedirectRule], state_dir: str | Path,
                 upstream_trust_store: str | Path | None = None,
                 listen_host: str = "127.0.0.1", io_timeout: float = 5.0):
        self.rules = rules
        self.ca = LocalCa(state_dir)
        self.upstream_trust_store = upstream_trust_store
        self.listen_host = listen_host
        self.io_timeout = io_timeout
        self.sessions: list[ProbeSession] = []
        self._listeners: dict[int, socket.socket] = {}
        self._rule_addr: dict[int, tuple[str, int]] = {}
        self._threads: list[threading.Thread] = []
        self._lock = threading.Lock()
        self._stopping = threading.Event()

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        for i, rule in enumerate(self.rules):
            listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            listener.bind((self.listen_host, 0))
            listener.listen(16)
            listener.settimeout(0.2)
            self._listeners[i] = listener
            self._rule_addr[i] = listener.getsockname()
            thread = threading.Thread(target=self._accept_loop, args=(i, rule),
                                      daemon=True, name=f"probe-{rule.device_id}-{i}")
            thread.start()
            self._threads.append(thread)

    def listen_addr(self, rule_index: int) -> tuple[str, int]:
        return self._rule_addr[rule_index]

    def stop(self) -> None:
        self._stopping.set()
        for thread in self._threads:
            thread.join(timeout=self.io_timeout + 2)
        for listener in self._listeners.values():
            listener.close()

    def _accept_loop(self, rule_index: int, rule: RedirectRule) -> None:
        listener = self._listeners[rule_index]
        while not self._stopping.is_set():
            try:
                conn, _peer = listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            self._handle(conn, rule)

    # -- connection handling ---------------------------------------------------

    def _handle(self, conn: socket.socket, rule: RedirectRule) -> None:
        session = ProbeSession(device_id=rule.device_id,
                               server_endpoint=(rule.upstream_host,
                                                rule.upstream_addr[1]),
                               start=time.time())
        session.log("open", device=rule.device_id, upstream=rule.upstream_host)
        conn.settimeout(self.io_timeout)
        try:
            head = conn.recv(3, socket.MSG_PEEK)
        except (socket.timeout, OSError):
            head = b""
        if not (len(head) >= 3 and head[0] == 0x16 and head[1] == 0x03):
            session.tls = False
            self._relay_plain(conn, rule, session)
        else:
            self._intercept_tls(conn, rule, session)
        session.end = time.time()
        session.log("close")
        with self._lock:
            self.sessions.append(session)

    def _relay_plain(self, conn: socket.socket, rule: RedirectRule,
                     session: ProbeSession) -> None:
        """Non-TLS traffic is relayed untouched, only logged."""
        session.log("plain_relay_start")
        try:
            upstream = socket.create_connection(rule.upstream_addr,
                                                timeout=self.io_timeout)
        except OSError as exc:
            session.upstream_ok = False
            session.log("upstream_failed", error=str(exc))
            conn.close()
            return
        up, down = self._pump(conn, upstream, session, plain=True)
        session.bytes_device_to_server = up
        session.bytes_server_to_device = down
        conn.close()
        upstream.close()

    def _connect_upstream(self, rule: RedirectRule,
                          session: ProbeSession) -> ssl.SSLSocket | None:
        """Upstream leg first: we validate the genuine chain before forging it."""
        ctx = ssl.create_default_context()
        if self.upstream_trust_store is not None:
            ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
            ctx.load_verify_locations(str(self.upstream_trust_store))
        try:
            raw = socket.create_connection(rule.upstream_addr, timeout=self.io_timeout)
            tls = ctx.wrap_socket(raw, server_hostname=rule.upstream_host)
            session.log("upstream_connected", cipher=tls.cipher()[0])
            return tls
        except (OSError, ssl.SSLError) as exc:
            session.upstream_ok = False
            session.log("upstream_failed", error=str(exc))
            return None

    def _intercept_tls(self, conn: socket.socket, rule: RedirectRule,
                       session: ProbeSession) -> None:
        upstream = self._connect_upstream(rule, session)
        if upstream is None:
            conn.close()
            return
        leaf_der = upstream.getpeercert(binary_form=True)
        chain_path, key_path = self.ca.forge_chain(rule.upstream_host, leaf_der)
        session.log("forged_chain", chain=chain_path.name)

        server_ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
        server_ctx.load_cert_chain(str(chain_path), str(key_path))
        server_ctx.set_ciphers("DEFAULT:@SECLEVEL=1")
        session.handshake_started = True
        try:
            device = server_ctx.wrap_socket(conn, server_side=True,
                                            suppress_ragged_eofs=False)
        except ssl.SSLError as exc:
            alert = _alert_from_error(exc)
            if alert is not None:
                session.record_alert(*alert)
            else:
                session.device_closed_midstream = True
                session.log("handshake_abandoned", error=str(exc))
            conn.close()
            upstream.close()
            return
        except OSError as exc:
            session.device_closed_midstream = True
            session.log("handshake_abandoned", error=str(exc))
            conn.close()
            upstream.close()
            return
        session.handshake_complete = True
        session.log("forged_handshake_ok", cipher=device.cipher()[0])

        up, down = self._pump(device, upstream, session, plain=False)
        session.bytes_device_to_server = up
        session.bytes_server_to_device = down
        for sock in (device, upstream):
            try:
                sock.close()
            except OSError:
                pass

    def _pump(self, device, upstream, session: ProbeSession, plain: bool
              ) -> tuple[int, int]:
        """Bidirectional relay; returns (device->server, server->device) byte
        counts as seen in plaintext on the device side."""
        up_bytes = down_bytes = 0
        device.setblocking(False)
        upstream.setblocking(False)
        deadline = time.time() + self.io_timeout
        open_ends = {device: True, upstream: True}
        while time.time() < deadline and all(open_ends.values()):
            readable, _, _ = select.select([device, upstream], [], [], 0.1)
            for sock in readable:
                try:
                    data = sock.recv(16384)
                except (ssl.SSLWantReadError, ssl.SSLWantWriteError, BlockingIOError):
                    continue
                except ssl.SSLZeroReturnError:
                    # orderly TLS shutdown: the peer sent close_notify
                    if sock is device and session.app_records_relayed == 0 \
                            and not plain:
                        session.record_alert(0, "close_notify")
                    open_ends[sock] = False
                    continue
                except (ssl.SSLEOFError, ConnectionResetError, OSError):
                    if sock is device:
                        session.device_closed_midstream = True
                        session.log("device_reset")
                    open_ends[sock] = False
                    continue
                if not data:
                    if sock is device and not plain and \
                            session.app_records_relayed == 0:
                        session.record_alert(0, "close_notify")
                    open_ends[sock] = False
                    continue
                other = upstream if sock is device else device
                try:
                    other.sendall(data)
                except (ssl.SSLError, OSError):
                    open_ends[other] = False
                    continue
                deadline = time.time() + self.io_timeout
                if sock is device:
                    up_bytes += len(data)
                    session.bytes_sent_upstream += len(data)
                    if not plain:
                        session.app_records_relayed += 1
                        if len(session.plaintext_device_to_server) < PLAINTEXT_CAP:
                            session.plaintext_device_to_server += data
                    session.log("app_data", direction="up", n=len(data))
                else:
                    down_bytes += len(data)
                    if not plain:
                        session.app_records_relayed += 1
                        if len(session.plaintext_server_to_device) < PLAINTEXT_CAP:
                            session.plaintext_server_to_device += data
                    session.log("app_data", direction="down", n=len(data))
        return up_bytes, down_bytes


def collate_sessions(sessions: list[ProbeSession]) -> None:
    """Fill the cross-session fields: redial counts per (device, endpoint)
    pair and whether the device produced any traffic after each session."""
    by_pair: dict[tuple[str, tuple[str, int]], list[ProbeSession]] = {}
    last_activity: dict[str, float] = {}
    for s in sorted(sessions, key=lambda s: s.start):
        by_pair.setdefault((s.device_id, s.server_endpoint), []).append(s)
        last_activity[s.device_id] = max(last_activity.get(s.device_id, 0.0), s.end)
    for pair_sessions in by_pair.values():
        redials = 0
        for prev, nxt in zip(pair_sessions, pair_sessions[1:]):
            abandoned = (prev.handshake_started and not prev.handshake_complete
                         and prev.alert_code is None)
            if abandoned and nxt.start - prev.end <= RECONNECT_WINDOW:
                redials += 1
        for s in pair_sessions:
            s.redial_count = redials
    for s in sessions:
        s.device_traffic_after = last_activity[s.device_id] > s.end + 1e-6


def run_probe(rules: list[RedirectRule], duration: float,
              state_dir: str | Path,
              upstream_trust_store: str | Path | None = None,
              device_id: str | None = None) -> ProbeResult:
    """Passive front of the probe: listen for the given duration, then
    collate. The simulated fleet drives ProbeServer directly instead."""
    active = [r for r in rules if device_id is None or r.device_id == device_id]
    server = ProbeServer(active, state_dir, upstream_trust_store)
    started = time.time()
    server.start()
    time.sleep(duration)
    server.stop()
    collate_sessions(server.sessions)
    status = {}
    seen = {s.device_id for s in server.sessions}
    for rule in active:
        status[rule.device_id] = "ok" if rule.device_id in seen else "NO_TRAFFIC"
    return ProbeResult(sessions=server.sessions, device_status=status,
                       started=started, ended=time.time())
