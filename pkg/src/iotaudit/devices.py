"""Device metadata: identity, category, and first-party attribution patterns."""

from __future__ import annotations

import dataclasses
from pathlib import Path

import yaml

# The twelve product categories the corpus covers. Reports collapse the last
# four into a single "other" column.
CATEGORIES = (
    "camera", "doorbell", "hub", "humidifier", "light", "plug",
    "sensor", "speaker", "mirror", "tv", "cleaner", "feeder",
)
_OTHER = ("mirror", "tv", "cleaner", "feeder")


def display_category(category: str) -> str:
    """Category name as it appears in report tables."""
    return "other" if category in _OTHER else category


@dataclasses.dataclass
class DeviceInfo:
    device_id: str
    name: str
    category: str
    brand: str = ""
    mac: str | None = None
    ip: str | None = None
    # Organization name fragments and domain suffixes that identify the
    # manufacturer or its companion app (first-party evidence).
    first_party_orgs: list[str] = dataclasses.field(default_factory=list)
    first_party_domains: list[str] = dataclasses.field(default_factory=list)
    app_vendors: list[str] = dataclasses.field(default_factory=list)

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(
                f"device {self.device_id!r}: unknown category {self.category!r} "
                f"(expected one of {', '.join(CATEGORIES)})"
            )
        if self.mac:
            self.mac = self.mac.lower().replace("-", ":")

    @property
    def display_category(self) -> str:
        return display_category(self.category)


def load_devices(path: str | Path) -> dict[str, DeviceInfo]:
    """Load a device metadata file into {device_id: DeviceInfo}."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    entries = doc.get("devices", doc if isinstance(doc, list) else [])
    devices: dict[str, DeviceInfo] = {}
    for entry in entries:
        info = DeviceInfo(
            device_id=str(entry["device_id"]),
            name=entry.get("name", str(entry["device_id"])),
            category=entry["category"],
            brand=entry.get("brand", ""),
            mac=entry.get("mac"),
            ip=entry.get("ip"),
            first_party_orgs=list(entry.get("first_party_orgs", [])),
            first_party_domains=list(entry.get("first_party_domains", [])),
            app_vendors=list(entry.get("app_vendors", [])),
        )
        if info.device_id in devices:
            raise ValueError(f"duplicate device_id {info.device_id!r} in {path}")
        devices[info.device_id] = info
    return devices
