"""Lifecycle phase labels shared by every module."""

from __future__ import annotations

import enum


class PhaseLabel(enum.Enum):
    """The four operational phases a consumer IoT device passes through."""

    SETUP = "setup"
    INTERACTION = "interaction"
    IDLE = "idle"
    DELETION = "deletion"

    @classmethod
    def parse(cls, text: str) -> "PhaseLabel":
        t = text.strip().lower()
        for label in cls:
            if t == label.value or t == label.name.lower():
                return label
        aliases = {"su": cls.SETUP, "ir": cls.INTERACTION, "id": cls.IDLE,
                   "de": cls.DELETION, "delete": cls.DELETION}
        if t in aliases:
            return aliases[t]
        raise ValueError(f"unknown lifecycle phase: {text!r}")

    def __str__(self) -> str:
        return self.value


PHASE_ORDER = [PhaseLabel.SETUP, PhaseLabel.INTERACTION, PhaseLabel.IDLE, PhaseLabel.DELETION]
