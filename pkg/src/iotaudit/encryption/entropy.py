"""Per-byte Shannon entropy, normalized to [0, 1]."""

from __future__ import annotations

import math
from collections import Counter


def payload_entropy(payload: bytes) -> float:
    """Shannon entropy of the byte-value distribution, divided by 8 bits.

    0.0 means a single repeated byte value; 1.0 means all 256 values equally
    frequent. Empty payloads are a caller error: flows without application
    payload are skipped before classification, never scored.
    """
    if not payload:
        raise ValueError("payload_entropy requires at least one byte")
    n = len(payload)
    bits = 0.0
    for count in Counter(payload).values():
        p = count / n
        bits -= p * math.log2(p)
    return bits / 8.0
