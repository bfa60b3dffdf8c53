"""Operation process files: the predefined operation sequence an experimenter
walks through for one device category."""

from __future__ import annotations

import dataclasses
from pathlib import Path

import yaml

from ..lifecycle import PhaseLabel


@dataclasses.dataclass
class Operation:
    name: str
    phase: PhaseLabel
    instructions: str
    min_duration: float = 0.0

    def __post_init__(self) -> None:
        if self.min_duration < 0:
            raise ValueError(f"operation {self.name!r}: min_duration must be >= 0")


@dataclasses.dataclass
class OperationProcessFile:
    device_category: str
    operations: list[Operation]

    def __post_init__(self) -> None:
        names = [op.name for op in self.operations]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValueError(f"duplicate operation names: {sorted(dupes)}")


def load_process_file(path: str | Path) -> OperationProcessFile:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or "operations" not in doc:
        raise ValueError(f"{path}: expected a mapping with an 'operations' list")
    ops = [
        Operation(
            name=str(entry["name"]),
            phase=PhaseLabel.parse(str(entry["phase"])),
            instructions=str(entry.get("instructions", "")),
            min_duration=float(entry.get("min_duration", 0)),
        )
        for entry in doc["operations"]
    ]
    return OperationProcessFile(device_category=str(doc.get("device_category", "")),
                                operations=ops)
