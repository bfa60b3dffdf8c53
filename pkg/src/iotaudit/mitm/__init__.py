from .ca import LocalCa
from .probe import (ProbeServer, ProbeResult, ProbeSession, RedirectRule,
                    TranscriptEvent, run_probe, load_redirect_rules)
from .classify import MitmObservation, MitmVerdict, classify_session, verdict_table
from .apis import ApiRecord, decrypt_transcripts
from .fleet import FleetSpec, SimulatedFleet, load_fleet_spec

__all__ = [
    "LocalCa",
    "ProbeServer", "ProbeResult", "ProbeSession", "RedirectRule",
    "TranscriptEvent", "run_probe", "load_redirect_rules",
    "MitmObservation", "MitmVerdict", "classify_session", "verdict_table",
    "ApiRecord", "decrypt_transcripts",
    "FleetSpec", "SimulatedFleet", "load_fleet_spec",
]
