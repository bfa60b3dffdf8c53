"""Server-party attribution: the fixed three-rule order that assigns every
destination to first, support, or third party with named evidence."""

from __future__ import annotations

import dataclasses
import enum
from importlib import resources
from pathlib import Path

import yaml

from ..devices import DeviceInfo


class Party(enum.Enum):
    FIRST = "first"
    SUPPORT = "support"
    THIRD = "third"
    UNRESOLVED = "unresolved"


def load_aliases(path: str | Path | None = None) -> dict[str, str]:
    if path is None:
        text = resources.files("iotaudit.data").joinpath("org_aliases.yaml").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    doc = yaml.safe_load(text) or {}
    return {str(k).lower(): str(v) for k, v in (doc.get("aliases") or {}).items()}


def normalize_org(raw: str, aliases: dict[str, str] | None = None) -> str:
    """Canonical organization identity, case-insensitive via the alias table."""
    if not raw:
        return raw
    if aliases:
        hit = aliases.get(raw.strip().lower())
        if hit:
            return hit
    return raw.strip()


@dataclasses.dataclass(frozen=True)
class PolicyEntry:
    pattern: str
    kind: str      # "domain" (exact suffix) | "organization" (exact string)
    source: str    # human-readable policy-document reference

    def __post_init__(self):
        if self.kind not in ("domain", "organization"):
            raise ValueError(f"policy entry {self.pattern!r}: kind must be "
                             "'domain' or 'organization'")
        if not self.source:
            raise ValueError(f"policy entry {self.pattern!r} has no source note")


@dataclasses.dataclass
class PartyPolicyMap:
    """Support-party evidence curated from privacy policies and third-party
    data sharing documents."""

    entries: list[PolicyEntry]

    def match(self, domains: set[str], organization: str) -> PolicyEntry | None:
        org = (organization or "").strip().lower()
        for entry in self.entries:
            if entry.kind == "organization":
                if org and org == entry.pattern.strip().lower():
                    return entry
            else:
                if any(_domain_suffix_match(d, entry.pattern) for d in domains):
                    return entry
        return None


def _domain_suffix_match(domain: str, pattern: str) -> bool:
    d, p = domain.lower().rstrip("."), pattern.lower().rstrip(".")
    return d == p or d.endswith("." + p)


def load_policy_map(path: str | Path | None) -> PartyPolicyMap:
    if path is None:
        return PartyPolicyMap(entries=[])
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    entries = [PolicyEntry(pattern=str(e["pattern"]), kind=str(e.get("kind", "domain")),
                           source=str(e.get("source", "")))
               for e in doc.get("entries", [])]
    return PartyPolicyMap(entries=entries)


def classify_party(domains: set[str], organization: str,
                   device: DeviceInfo | None,
                   policy: PartyPolicyMap) -> tuple[Party, str]:
    """Apply the rules in order; returns (party, evidence naming the match).

    1. organization or domain matches the device's manufacturer/companion-app
       patterns -> FIRST
    2. matches the support-party policy map -> SUPPORT
    3. otherwise -> THIRD
    """
    org = (organization or "").lower()
    if device is not None:
        org_patterns = [p for p in (device.first_party_orgs + device.app_vendors
                                    + ([device.brand] if device.brand else [])) if p]
        for pattern in org_patterns:
            if org and pattern.lower() in org:
                return Party.FIRST, f"organization matches first-party pattern {pattern!r}"
        for pattern in device.first_party_domains:
            for domain in domains:
                if _domain_suffix_match(domain, pattern):
                    return Party.FIRST, f"domain {domain!r} matches first-party suffix {pattern!r}"
    hit = policy.match(domains, organization)
    if hit is not None:
        return Party.SUPPORT, (f"policy map {hit.kind} pattern {hit.pattern!r} "
                               f"({hit.source})")
    return Party.THIRD, "no match"
