import re
from typing import Iterable, List, Tuple


def normalize_path(path: str) -> str:
    # Forward slashes, no leading "./" or "/", no duplicate separators
    path = re.sub(r'[\\/]+', '/', path.strip())
    path = re.sub(r'^(?:\./)+', '', path)
    return path.lstrip('/')


def coalesce_spans(spans: Iterable[Tuple[int, int]]) -> List[Tuple[int, int]]:
    """Merge half-open (start, end) spans that overlap or touch; drops empty spans."""
    merged: List[Tuple[int, int]] = []
    for start, end in sorted(s for s in spans if s[1] > s[0]):
        if merged and start <= merged[-1][1]:
            if end > merged[-1][1]:
                merged[-1] = (merged[-1][0], end)
        else:
            merged.append((start, end))
    return merged


def spans_to_ranges(spans: Iterable[Tuple[int, int]]) -> List[Tuple[int, int]]:
    return [(start, end - start) for start, end in spans]


def ranges_to_spans(ranges: Iterable[Tuple[int, int]]) -> List[Tuple[int, int]]:
    return [(offset, offset + length) for offset, length in ranges]


def overlaps(a_start: int, a_end: int, b_start: int, b_end: int) -> bool:
    return a_start < b_end and b_start < a_end
