"""Destination statistics: per-endpoint records, normalized traffic
proportions, per-phase server-party counts, and organization ranking."""

from __future__ import annotations

import dataclasses
import logging
from collections import defaultdict

from ..devices import DeviceInfo
from ..pcapio.dnsmap import DnsMap
from ..pcapio.flows import FlowRecord
from ..pcapio.packet import is_global_address
from .geo import GeoProvider, UNKNOWN
from .party import Party, PartyPolicyMap, classify_party, normalize_org

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class DestinationRecord:
    device_id: str
    ip: str
    domains: set[str]
    country: str
    organization: str
    party: Party = Party.UNRESOLVED
    evidence: str = ""


def build_destinations(flows: list[FlowRecord], dns_map: DnsMap, geo: GeoProvider,
                       device: DeviceInfo | None, policy: PartyPolicyMap,
                       aliases: dict[str, str] | None = None) -> dict[str, DestinationRecord]:
    """One DestinationRecord per global-scope remote IP a device contacted."""
    device_ips = {device.ip} if device and device.ip else set()
    records: dict[str, DestinationRecord] = {}
    for flow in flows:
        ip, _port = flow.remote_endpoint(device_ips)
        if not is_global_address(ip):
            continue
        if ip in records:
            continue
        result = geo.geolocate(ip)
        org = normalize_org(result.org, aliases) if result.org != UNKNOWN else UNKNOWN
        rec = DestinationRecord(device_id=device.device_id if device else "",
                                ip=ip, domains=dns_map.domains_for(ip),
                                country=result.country, organization=org)
        rec.party, rec.evidence = classify_party(rec.domains, org if org != UNKNOWN else "",
                                                 device, policy)
        records[ip] = rec
    return records


@dataclasses.dataclass(frozen=True)
class FlowCountry:
    """One flow's byte contribution for the proportion statistics."""
    device_id: str
    category: str
    country: str
    bytes: int


@dataclasses.dataclass
class ProportionTable:
    # per-category rows: equal device weight eliminates camera-byte bias
    rows: dict[tuple[str, str], float]
    overall: dict[str, float]                 # per-device mean across all devices
    overall_raw_bytes: dict[str, float]       # plain byte shares, for comparison
    excluded_devices: list[str]               # devices with zero attributable bytes


def proportion_table(traffic: list[FlowCountry]) -> ProportionTable:
    """Normalized destination-country shares.

    Per device the share to a country is bytes-to-country / device-total; a
    category's (and the corpus') share is the equal-weight mean over devices,
    so shares sum to 1 per category regardless of per-device volume.
    """
    per_device: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    device_category: dict[str, str] = {}
    for item in traffic:
        per_device[item.device_id][item.country] += item.bytes
        device_category[item.device_id] = item.category

    device_shares: dict[str, dict[str, float]] = {}
    excluded: list[str] = []
    for device_id, counts in per_device.items():
        total = sum(counts.values())
        if total == 0:
            excluded.append(device_id)
            logger.warning("device %s has no attributable bytes; excluded from "
                           "proportion averages", device_id)
            continue
        device_shares[device_id] = {c: b / total for c, b in counts.items()}

    by_category: dict[str, list[dict[str, float]]] = defaultdict(list)
    for device_id, shares in device_shares.items():
        by_category[device_category[device_id]].append(shares)

    rows: dict[tuple[str, str], float] = {}
    for category, share_list in by_category.items():
        n = len(share_list)
        countries = sorted({c for s in share_list for c in s})
        for country in countries:
            rows[(category, country)] = sum(s.get(country, 0.0) for s in share_list) / n

    overall: dict[str, float] = {}
    if device_shares:
        n_all = len(device_shares)
        for country in sorted({c for s in device_shares.values() for c in s}):
            overall[country] = sum(s.get(country, 0.0)
                                   for s in device_shares.values()) / n_all

    raw: dict[str, int] = defaultdict(int)
    for item in traffic:
        raw[item.country] += item.bytes
    raw_total = sum(raw.values())
    overall_raw = {c: b / raw_total for c, b in sorted(raw.items())} if raw_total else {}

    return ProportionTable(rows=rows, overall=overall, overall_raw_bytes=overall_raw,
                           excluded_devices=sorted(excluded))


@dataclasses.dataclass(frozen=True)
class ServerContact:
    """One device-phase-endpoint observation, party-attributed."""
    device_id: str
    category: str
    phase: str                # lifecycle phase value, e.g. "setup"
    ip: str
    party: Party


TOTAL_PHASE = "total"


def server_party_counts(contacts: list[ServerContact],
                        devices_per_category: dict[str, int] | None = None
                        ) -> dict[tuple[str, str, str], float]:
    """(phase, category, party) -> mean distinct-server count per device.

    The total row counts distinct servers across the whole lifecycle, not the
    sum of the phases. Devices that contacted nothing still count in the
    denominator when devices_per_category says the category is larger.
    """
    distinct: dict[tuple[str, str, str, str], set[str]] = defaultdict(set)
    categories: dict[str, set[str]] = defaultdict(set)
    for c in contacts:
        distinct[(c.phase, c.category, c.party.value, c.device_id)].add(c.ip)
        distinct[(TOTAL_PHASE, c.category, c.party.value, c.device_id)].add(c.ip)
        categories[c.category].add(c.device_id)

    table: dict[tuple[str, str, str], float] = {}
    sums: dict[tuple[str, str, str], int] = defaultdict(int)
    for (phase, category, party, _device), ips in distinct.items():
        sums[(phase, category, party)] += len(ips)
    for (phase, category, party), total in sums.items():
        n = (devices_per_category or {}).get(category) or len(categories[category])
        table[(phase, category, party)] = total / n
    return table


def organization_ranking(dest_records: list[DestinationRecord]
                         ) -> list[tuple[str, int]]:
    """Organizations by the number of distinct devices contacting them,
    descending, ties broken alphabetically. Unresolved organizations are
    not ranked."""
    devices_by_org: dict[str, set[str]] = defaultdict(set)
    for rec in dest_records:
        if rec.organization and rec.organization != UNKNOWN:
            devices_by_org[rec.organization].add(rec.device_id)
    return sorted(((org, len(devs)) for org, devs in devices_by_org.items()),
                  key=lambda item: (-item[1], item[0]))
