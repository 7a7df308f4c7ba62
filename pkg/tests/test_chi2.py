import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.utils.exceptions.exceptions import ArgumentError
from app.utils.stats.chi2 import (
    byte_histogram,
    chi_squared,
    prefix_sum_sq,
    shannon_entropy,
    window_sum_sq,
)


def literal_chi_squared(data: bytes) -> float:
    m = len(data)
    expected = m / 256
    counts = [0] * 256
    for b in data:
        counts[b] += 1
    return sum((c - expected) ** 2 / expected for c in counts)


def test_exact_uniform_is_zero():
    assert chi_squared(bytes(range(256)) * 4) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("m", [1, 16, 512, 4096])
def test_constant_window_is_255_m(m):
    assert chi_squared(b"\x41" * m) == pytest.approx(255.0 * m, rel=1e-9)


def test_sixteen_distinct_bytes():
    assert chi_squared(bytes(range(16))) == pytest.approx(240.0, rel=1e-9)


def test_empty_window_rejected():
    with pytest.raises(ArgumentError):
        chi_squared(b"")


@given(st.binary(min_size=1, max_size=2048))
def test_closed_form_matches_literal_sum(data):
    assert chi_squared(data) == pytest.approx(literal_chi_squared(data), rel=1e-9, abs=1e-9)


@settings(max_examples=50)
@given(st.binary(min_size=1, max_size=400), st.integers(min_value=1, max_value=48))
def test_window_sum_sq_matches_direct(data, width):
    arr = np.frombuffer(data, dtype=np.uint8)
    got = window_sum_sq(arr, width)
    if len(data) < width:
        assert got.size == 0
        return
    expected = [int((byte_histogram(arr[p:p + width]).astype(np.int64) ** 2).sum())
                for p in range(len(data) - width + 1)]
    assert got.tolist() == expected


@given(st.binary(max_size=600))
def test_prefix_sum_sq_matches_direct(data):
    arr = np.frombuffer(data, dtype=np.uint8)
    expected = [int((byte_histogram(arr[:n]).astype(np.int64) ** 2).sum()) for n in range(1, len(data) + 1)]
    assert prefix_sum_sq(arr).tolist() == expected


def test_entropy_limits():
    assert shannon_entropy(b"") == 0.0
    assert shannon_entropy(b"\x00" * 100) == 0.0
    assert shannon_entropy(bytes(range(256))) == pytest.approx(8.0)


@given(st.binary(min_size=1, max_size=1024))
def test_entropy_matches_direct_summation(data):
    counts = [data.count(bytes([b])) for b in set(data)]
    expected = -sum(c / len(data) * math.log2(c / len(data)) for c in counts)
    assert shannon_entropy(data) == pytest.approx(expected, abs=1e-9)
