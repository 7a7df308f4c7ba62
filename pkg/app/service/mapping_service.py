import logging
from bisect import bisect_right
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np
from fastapi import Depends

from app.core.config.env import Settings, get_settings
from app.domain.schema.delta_schema import DeltaBlock
from app.domain.schema.layout_schema import (
    ExtentEntry,
    FileLayout,
    FileRegion,
    LayoutManifest,
    MappingResult,
    UnmappedRange,
)
from app.domain.schema.sawa_schema import SuspiciousRange
from app.domain.schema.snapshot_schema import BlockImage
from app.repository.layout_repo import LayoutRepository
from app.utils.exceptions.exceptions import CapacityError, FavscanError, ManifestError
from app.utils.helper import coalesce_spans, normalize_path, spans_to_ranges

logger = logging.getLogger(__name__)


class Interval(NamedTuple):
    start: int
    end: int
    path: str
    file_offset: int


class IntervalIndex:
    """Sorted, non-overlapping device intervals answering stab and overlap queries by bisection."""

    def __init__(self, intervals: Iterable[Interval] = ()):
        self.intervals: List[Interval] = sorted(intervals)
        self.starts = [iv.start for iv in self.intervals]

    def __len__(self) -> int:
        return len(self.intervals)

    def stab(self, offset: int) -> Optional[Tuple[str, int]]:
        """(path, file_offset) of the file byte stored at ``offset``, or None."""
        i = bisect_right(self.starts, offset) - 1
        if i >= 0:
            iv = self.intervals[i]
            if offset < iv.end:
                return iv.path, iv.file_offset + (offset - iv.start)
        return None

    def overlap(self, start: int, end: int) -> List[Interval]:
        i = max(bisect_right(self.starts, start) - 1, 0)
        hits = []
        while i < len(self.intervals) and self.intervals[i].start < end:
            iv = self.intervals[i]
            if iv.end > start:
                hits.append(iv)
            i += 1
        return hits


def build_index(manifest: LayoutManifest) -> IntervalIndex:
    """
    Index every file's data bytes by device offset.

    Raises:
        ManifestError: If two files claim overlapping device extents.
    """
    allocated = sorted(
        (e.device_offset, e.device_end, f.path) for f in manifest.files for e in f.extents
    )
    for (s0, e0, p0), (s1, _, p1) in zip(allocated, allocated[1:]):
        if s1 < e0:
            raise ManifestError(detail=f"Device extents of {p0} and {p1} overlap at offset {s1}",
                                data={"paths": [p0, p1], "device_offset": s1})
    return IntervalIndex(
        Interval(start, end, f.path, file_offset)
        for f in manifest.files
        for start, end, file_offset in f.data_spans()
        if end > start
    )


def map_ranges(index: IntervalIndex, suspicious: Iterable[SuspiciousRange],
               forwarded_small: Iterable[DeltaBlock] = ()) -> MappingResult:
    """
    Translate suspicious device spans to coalesced per-file byte ranges.

    Bytes that hit no file are returned as unmapped ranges.
    """
    device_spans = [(r.device_offset, r.end) for r in suspicious]
    device_spans += [(d.device_offset, d.end) for d in forwarded_small]

    per_file: Dict[str, List[Tuple[int, int]]] = {}
    unmapped: List[Tuple[int, int]] = []
    for start, end in coalesce_spans(device_spans):
        cursor = start
        for iv in index.overlap(start, end):
            lo, hi = max(start, iv.start), min(end, iv.end)
            if lo > cursor:
                unmapped.append((cursor, lo))
            base = iv.file_offset + (lo - iv.start)
            per_file.setdefault(iv.path, []).append((base, base + hi - lo))
            cursor = hi
        if cursor < end:
            unmapped.append((cursor, end))

    regions = [
        FileRegion(path=path, ranges=spans_to_ranges(coalesce_spans(spans)))
        for path, spans in sorted(per_file.items())
    ]
    return MappingResult(
        regions=regions,
        unmapped=[UnmappedRange(device_offset=s, length=e - s) for s, e in unmapped],
    )


def read_file(image: BlockImage, entry: FileLayout) -> bytes:
    """Reassemble a file from its extents; sparse holes read as zeros."""
    out = np.zeros(entry.size, dtype=np.uint8)
    for start, end, file_offset in entry.data_spans():
        out[file_offset:file_offset + (end - start)] = image.data[start:end]
    return out.tobytes()


class ExtentAllocator:
    """First-fit allocator over fixed-size device extents."""

    def __init__(self, image: BlockImage, extent_size: int = 4096, layout: Optional[LayoutManifest] = None,
                 reserved_extents: int = 0):
        self.extent_size = extent_size
        self.used = np.zeros(image.size // extent_size, dtype=bool)
        self.used[:reserved_extents] = True
        for f in (layout.files if layout else []):
            for e in f.extents:
                first = e.device_offset // extent_size
                last = (e.device_end - 1) // extent_size
                self.used[first:last + 1] = True

    @property
    def free_extents(self) -> int:
        return int((~self.used).sum())

    def allocate(self, size: int) -> List[Tuple[int, int]]:
        """
        Reserve enough extents for ``size`` bytes, preferring one contiguous run.

        Returns:
            List[Tuple[int, int]]: (first_extent, extent_count) pieces in file order.

        Raises:
            CapacityError: If the free extents cannot hold ``size`` bytes.
        """
        needed = -(-size // self.extent_size)
        if needed == 0:
            return []
        if needed > self.free_extents:
            raise CapacityError(detail=f"Image too small: need {needed} free extents, have {self.free_extents}",
                                data={"needed": needed, "free": self.free_extents})
        free = ~self.used
        # start of every free window of `needed` extents
        window = np.convolve(free.astype(np.int64), np.ones(needed, dtype=np.int64), mode="valid")
        fits = np.flatnonzero(window == needed)
        if fits.size:
            first = int(fits[0])
            self.used[first:first + needed] = True
            return [(first, needed)]

        pieces: List[Tuple[int, int]] = []
        remaining = needed
        for idx in np.flatnonzero(free).tolist():
            if pieces and pieces[-1][0] + pieces[-1][1] == idx:
                pieces[-1] = (pieces[-1][0], pieces[-1][1] + 1)
            else:
                pieces.append((idx, 1))
            self.used[idx] = True
            remaining -= 1
            if remaining == 0:
                break
        return pieces


class MappingService:
    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        self.layout_repo = LayoutRepository()

    def load_layout(self, path) -> LayoutManifest:
        layout, err = self.layout_repo.load(path)
        if err:
            if isinstance(err, FavscanError):
                raise err
            raise ManifestError(detail="Failed to read layout manifest", data=str(err))
        return layout

    def save_layout(self, layout: LayoutManifest, path) -> None:
        _, err = self.layout_repo.save(layout, path)
        if err:
            raise ManifestError(detail="Failed to write layout manifest", data=str(err))

    def write_file(self, image: BlockImage, allocator: ExtentAllocator, path: str, payload: bytes) -> FileLayout:
        """Allocate extents for ``payload`` and write it into ``image``."""
        extent_size = allocator.extent_size
        extents: List[ExtentEntry] = []
        file_offset = 0
        for first, count in allocator.allocate(len(payload)):
            device_offset = first * extent_size
            length = count * extent_size
            chunk = payload[file_offset:file_offset + length]
            image.data[device_offset:device_offset + len(chunk)] = np.frombuffer(chunk, dtype=np.uint8)
            extents.append(ExtentEntry(device_offset=device_offset, length=length, file_offset=file_offset))
            file_offset += length
        return FileLayout(path=path, size=len(payload), extents=extents)

    def layout_from_corpus(self, corpus_dir, image: BlockImage, layout: Optional[LayoutManifest] = None,
                           reserved_extents: int = 0) -> LayoutManifest:
        """
        Copy every file under ``corpus_dir`` into ``image`` at extent-aligned,
        first-fit locations and return the resulting layout.

        Raises:
            CapacityError: If the image runs out of free extents.
        """
        root = Path(corpus_dir)
        layout = layout or LayoutManifest(block_size=image.block_size, extent_size=self.settings.EXTENT_SIZE)
        allocator = ExtentAllocator(image, layout.extent_size, layout, reserved_extents)
        files = list(layout.files)
        for source in sorted(p for p in root.rglob("*") if p.is_file()):
            rel = normalize_path(source.relative_to(root).as_posix())
            files.append(self.write_file(image, allocator, rel, source.read_bytes()))
        logger.info("Laid out %d files from %s, %d extents free", len(files) - len(layout.files),
                    root, allocator.free_extents)
        return LayoutManifest(block_size=layout.block_size, extent_size=layout.extent_size, files=files)

    def map(self, layout: LayoutManifest, suspicious: Iterable[SuspiciousRange],
            forwarded_small: Iterable[DeltaBlock] = ()) -> MappingResult:
        result = map_ranges(build_index(layout), suspicious, forwarded_small)
        logger.info("Mapping: %d suspicious files (%d bytes), %d unmapped ranges", len(result.regions),
                    sum(r.total_bytes for r in result.regions), len(result.unmapped))
        return result


def get_mapping_service(settings: Settings = Depends(get_settings)) -> MappingService:
    return MappingService(settings)
