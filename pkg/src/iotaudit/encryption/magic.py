"""Versioned byte-signature table separating compressed/media payloads from
ciphertext before any entropy threshold is consulted."""

from __future__ import annotations

import dataclasses
from importlib import resources
from pathlib import Path

import yaml


@dataclasses.dataclass(frozen=True)
class MagicEntry:
    name: str
    offset: int
    prefix: bytes
    verdict_class: str  # "compressed" | "media"


@dataclasses.dataclass
class MagicNumberTable:
    entries: list[MagicEntry]
    version: int = 1

    def match(self, payload: bytes) -> MagicEntry | None:
        """Longest matching signature at its declared offset, or None."""
        best: MagicEntry | None = None
        for entry in self.entries:
            end = entry.offset + len(entry.prefix)
            if len(payload) >= end and payload[entry.offset:end] == entry.prefix:
                if best is None or len(entry.prefix) > len(best.prefix):
                    best = entry
        return best


def load_magic_table(path: str | Path | None = None) -> MagicNumberTable:
    if path is None:
        text = resources.files("iotaudit.data").joinpath("magic_numbers.yaml").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    doc = yaml.safe_load(text)
    entries = []
    for raw in doc["entries"]:
        prefix = bytes.fromhex(raw["prefix"])
        if not prefix:
            raise ValueError(f"magic entry {raw.get('name')!r} has an empty pattern")
        if raw["class"] not in ("compressed", "media"):
            raise ValueError(f"magic entry {raw.get('name')!r}: bad class {raw['class']!r}")
        entries.append(MagicEntry(name=raw["name"], offset=int(raw.get("offset", 0)),
                                  prefix=prefix, verdict_class=raw["class"]))
    return MagicNumberTable(entries=entries, version=int(doc.get("version", 1)))
