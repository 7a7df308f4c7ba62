import numpy as np

from app.utils.exceptions.exceptions import ArgumentError

BINS = 256


def as_array(data) -> np.ndarray:
    """View bytes-like input as a uint8 array without copying when possible."""
    if isinstance(data, np.ndarray):
        return data if data.dtype == np.uint8 else data.astype(np.uint8)
    if isinstance(data, (bytes, bytearray, memoryview)):
        return np.frombuffer(data, dtype=np.uint8)
    return np.frombuffer(bytes(data), dtype=np.uint8)


def byte_histogram(data) -> np.ndarray:
    return np.bincount(as_array(data), minlength=BINS)


def chi_squared_from_sum_sq(sum_sq: int, m: int) -> float:
    # sum_b (c_b - m/256)^2 / (m/256) == 256 * sum_b c_b^2 / m - m
    return sum_sq * float(BINS) / m - m


def chi_squared(window) -> float:
    """256-bin chi-squared statistic of a byte window against the uniform model."""
    arr = as_array(window)
    m = int(arr.size)
    if m < 1:
        raise ArgumentError(detail="chi-squared of an empty window is undefined")
    counts = np.bincount(arr, minlength=BINS).astype(np.int64)
    return chi_squared_from_sum_sq(int(counts @ counts), m)


def shannon_entropy(data) -> float:
    """Shannon entropy in bits per byte; an empty input has entropy 0."""
    arr = as_array(data)
    if arr.size == 0:
        return 0.0
    counts = np.bincount(arr, minlength=BINS)
    p = counts[counts > 0] / arr.size
    return float(-(p * np.log2(p)).sum()) + 0.0


def window_sum_sq(arr: np.ndarray, width: int) -> np.ndarray:
    """Sum of squared bin counts for every window ``arr[p:p+width]``.

    Counts equal-byte pairs at each lag through prefix sums, so the cost is
    O(width * len(arr)) integer work with no per-window Python loop.
    """
    n = int(arr.size)
    if n < width:
        return np.zeros(0, dtype=np.int64)
    starts = n - width + 1
    total = np.full(starts, width, dtype=np.int64)
    for lag in range(1, width):
        eq = (arr[:-lag] == arr[lag:]).astype(np.int64)
        prefix = np.concatenate(([0], np.cumsum(eq)))
        # pairs (i, i+lag) with p <= i and i+lag < p+width
        span = width - lag
        total += 2 * (prefix[span:span + starts] - prefix[:starts])
    return total


def prefix_sum_sq(arr: np.ndarray) -> np.ndarray:
    """Sum of squared bin counts of ``arr[:L]`` for every L in 1..len(arr)."""
    n = int(arr.size)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(arr, kind="stable")
    sorted_vals = arr[order]
    group_start = np.concatenate(([True], sorted_vals[1:] != sorted_vals[:-1]))
    first_index = np.maximum.accumulate(np.where(group_start, np.arange(n), 0))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n) - first_index
    # adding the k-th occurrence of a value raises its c^2 by 2k + 1
    return np.cumsum(2 * rank + 1)
