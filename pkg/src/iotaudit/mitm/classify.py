"""Session verdicts: map each transcript onto the reaction taxonomy."""

from __future__ import annotations

import dataclasses
import enum
from collections import defaultdict

from .probe import ProbeSession, RECONNECT_MIN_COUNT


class MitmVerdict(enum.Enum):
    UNKNOWN_CA = "Unknown CA"
    DECRYPT_ERROR = "Decrypt error"
    BAD_CERTIFICATE = "Bad certificate"
    CLOSE_NOTIFY = "Close notify"
    DECODE_ERROR = "Decode error"
    DISCONNECT_RECONNECT = "Disconnects and reconnects"
    SERVER_HANDSHAKE_FAILED = "Server handshake failed"
    NO_INTERNET = "Unable to connect to the internet"
    COMMUNICATES_NORMALLY = "Communicates normally"
    UNCLASSIFIED = "Unclassified"


_ALERT_VERDICTS = {
    48: MitmVerdict.UNKNOWN_CA,
    51: MitmVerdict.DECRYPT_ERROR,
    42: MitmVerdict.BAD_CERTIFICATE,
    46: MitmVerdict.BAD_CERTIFICATE,
    50: MitmVerdict.DECODE_ERROR,
}


@dataclasses.dataclass
class MitmObservation:
    device_id: str
    server_endpoint: tuple[str, int]
    verdict: MitmVerdict
    evidence: str


def classify_session(session: ProbeSession) -> MitmObservation:
    """Decision order: explicit alert, reconnect pattern, upstream failure,
    device silence, relayed application data; anything else is UNCLASSIFIED
    for manual review, never silently bucketed.

    close_notify (alert 0) only counts when no application data was relayed:
    an orderly shutdown after real traffic is still a working connection.
    """
    verdict: MitmVerdict | None = None
    if session.alert_code is not None:
        if session.alert_code in _ALERT_VERDICTS:
            verdict = _ALERT_VERDICTS[session.alert_code]
        elif session.alert_code == 0 and session.app_records_relayed == 0:
            verdict = MitmVerdict.CLOSE_NOTIFY
    if verdict is None:
        abandoned = (session.handshake_started and not session.handshake_complete
                     and session.alert_code is None)
        if abandoned and session.redial_count >= RECONNECT_MIN_COUNT:
            verdict = MitmVerdict.DISCONNECT_RECONNECT
        elif not session.upstream_ok:
            verdict = MitmVerdict.SERVER_HANDSHAKE_FAILED
        elif (session.app_records_relayed == 0 and not session.handshake_complete
              and not session.device_traffic_after):
            verdict = MitmVerdict.NO_INTERNET
        elif session.app_records_relayed > 0:
            verdict = MitmVerdict.COMMUNICATES_NORMALLY
        else:
            verdict = MitmVerdict.UNCLASSIFIED
    return MitmObservation(device_id=session.device_id,
                           server_endpoint=session.server_endpoint,
                           verdict=verdict, evidence=session.excerpt())


def verdict_table(observations: list[MitmObservation]
                  ) -> list[tuple[MitmVerdict, int, int]]:
    """(verdict, distinct device count, distinct server count) rows."""
    devices: dict[MitmVerdict, set[str]] = defaultdict(set)
    servers: dict[MitmVerdict, set[tuple[str, int]]] = defaultdict(set)
    for obs in observations:
        devices[obs.verdict].add(obs.device_id)
        servers[obs.verdict].add(obs.server_endpoint)
    return [(v, len(devices[v]), len(servers[v]))
            for v in MitmVerdict if v in devices]
