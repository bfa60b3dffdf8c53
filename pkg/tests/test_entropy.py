import math
import random
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from iotaudit.encryption import payload_entropy


def oracle_entropy(payload: bytes) -> float:
    """Direct -sum(p * log2 p) / 8 over the byte histogram."""
    n = len(payload)
    total = 0.0
    for value in range(256):
        count = payload.count(value)
        if count:
            p = count / n
            total -= p * math.log(p) / math.log(2)
    return total / 8.0


def test_all_zero_bytes():
    assert payload_entropy(b"\x00" * 1024) == 0.0


def test_uniform_all_byte_values():
    assert payload_entropy(bytes(range(256))) == 1.0


def test_aabb_is_one_eighth():
    assert payload_entropy(b"aabb") == pytest.approx(0.125, abs=1e-15)


def test_matches_oracle_on_random_payloads():
    rng = random.Random(20240301)
    for _ in range(1000):
        n = rng.randrange(1, 400)
        payload = bytes(rng.randrange(256) for _ in range(n))
        assert abs(payload_entropy(payload) - oracle_entropy(payload)) < 1e-12


def test_empty_payload_rejected():
    with pytest.raises(ValueError):
        payload_entropy(b"")


@given(st.binary(min_size=1, max_size=2048))
def test_bounds(payload):
    assert 0.0 <= payload_entropy(payload) <= 1.0


@given(st.binary(min_size=1, max_size=512))
def test_self_concatenation_invariant(payload):
    # doubling the payload leaves the byte distribution unchanged
    assert payload_entropy(payload + payload) == pytest.approx(
        payload_entropy(payload), abs=1e-12)
