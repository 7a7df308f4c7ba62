import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from fastapi import Depends

from app.core.config.env import Settings, get_settings
from app.domain.schema.delta_schema import DeltaBlock, DeltaSnapshot
from app.domain.schema.sawa_schema import SawaParams, SawaResult, SuspiciousRange
from app.utils.stats.chi2 import as_array, chi_squared, chi_squared_from_sum_sq, prefix_sum_sq, window_sum_sq

logger = logging.getLogger(__name__)

# (start, length, chi2) relative to the scanned buffer
Span = Tuple[int, int, float]


def chi_profile(x, p: int = 0) -> np.ndarray:
    """Chi-squared of x[p:p+L] for every L in 1..len(x)-p; element L-1 holds length L."""
    arr = as_array(x)[p:]
    sum_sq = prefix_sum_sq(arr)
    lengths = np.arange(1, arr.size + 1, dtype=np.float64)
    return sum_sq * float(256) / lengths - lengths


def _shrink_bisect(arr: np.ndarray, p: int, good: int, upper: int, tau: float) -> Tuple[int, float]:
    lo, hi = good, upper
    best = chi_squared(arr[p:p + lo])
    while lo < hi:
        mid = (lo + hi + 1) // 2
        c = chi_squared(arr[p:p + mid])
        if c <= tau:
            lo, best = mid, c
        else:
            hi = mid - 1
    return lo, best


def _shrink_exact(arr: np.ndarray, p: int, good: int, upper: int, tau: float) -> Tuple[int, float]:
    profile = chi_profile(arr[p:p + upper])
    ok = np.flatnonzero(profile[good - 1:] <= tau)
    length = good + int(ok[-1])
    return length, float(profile[length - 1])


def scan(x, params: SawaParams) -> List[Span]:
    """
    Slide, expand and shrink over one buffer.

    Windows of width w are scored at every stride position; an accepted window
    is doubled while it stays under tau and inside the buffer, then shrunk to
    the longest accepted length below the first rejected doubling. Scanning
    resumes right after each emitted span.
    """
    arr = as_array(x)
    n = int(arr.size)
    w, s, tau = params.w, params.s, params.tau
    if n < w:
        return []

    base = chi_squared_from_sum_sq(window_sum_sq(arr, w), w)
    flagged = base <= tau
    shrink = _shrink_exact if params.shrink == "exact" else _shrink_bisect

    spans: List[Span] = []
    p = 0
    while p + w <= n:
        hits = np.flatnonzero(flagged[p:n - w + 1:s])
        if hits.size == 0:
            break
        p += int(hits[0]) * s

        length = w
        while p + 2 * length <= n and chi_squared(arr[p:p + 2 * length]) <= tau:
            length *= 2
        # the doubling that stopped expansion bounds the search
        upper = n - p if p + 2 * length > n else 2 * length - 1
        length, c = shrink(arr, p, length, upper, tau)

        spans.append((p, length, float(c)))
        p += length
    return spans


class SawaService:
    """Sliding adaptive window analysis over delta blocks."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()

    def default_params(self) -> SawaParams:
        return SawaParams(w=self.settings.SAWA_WINDOW, s=self.settings.SAWA_STRIDE,
                          tau=self.settings.SAWA_TAU, shrink=self.settings.SAWA_SHRINK)

    def _analyze_block(self, delta: DeltaBlock, params: SawaParams) -> List[SuspiciousRange]:
        return [
            SuspiciousRange.spanning(delta.device_offset + start, length, c, self.settings.BLOCK_SIZE)
            for start, length, c in scan(delta.new_bytes, params)
        ]

    def analyze(self, delta: DeltaSnapshot, params: Optional[SawaParams] = None) -> SawaResult:
        """
        Score every delta block; blocks shorter than the window are forwarded unscored.

        Returns:
            SawaResult: Suspicious ranges sorted by device offset plus the forwarded small blocks.
        """
        params = params or self.default_params()
        large = [d for d in delta.deltas if d.length >= params.w]
        small = [d for d in delta.deltas if d.length < params.w]

        if self.settings.WORKERS > 1 and len(large) > 1:
            with ThreadPoolExecutor(max_workers=self.settings.WORKERS) as pool:
                parts = list(pool.map(lambda d: self._analyze_block(d, params), large))
        else:
            parts = [self._analyze_block(d, params) for d in large]

        suspicious = sorted((r for part in parts for r in part), key=lambda r: r.device_offset)
        logger.info("SAWA: %d delta blocks scanned, %d suspicious ranges, %d forwarded small",
                    len(large), len(suspicious), len(small))
        return SawaResult(params=params, suspicious=suspicious, forwarded_small=small,
                          scanned_bytes=sum(d.length for d in large))

    def flag_all(self, delta: DeltaSnapshot, params: Optional[SawaParams] = None) -> SawaResult:
        """Prefilter stand-in that marks every delta byte suspicious."""
        params = params or self.default_params()
        suspicious = [
            SuspiciousRange.spanning(d.device_offset, d.length, chi_squared(d.new_bytes), self.settings.BLOCK_SIZE)
            for d in delta.deltas
        ]
        return SawaResult(params=params, suspicious=suspicious,
                          scanned_bytes=sum(d.length for d in delta.deltas))


def get_sawa_service(settings: Settings = Depends(get_settings)) -> SawaService:
    return SawaService(settings)
