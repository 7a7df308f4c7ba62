from pathlib import Path

import numpy as np
import pytest

from app.domain.schema.layout_schema import ExtentEntry, FileLayout, LayoutManifest
from app.domain.schema.sawa_schema import SuspiciousRange
from app.domain.schema.snapshot_schema import BlockImage
from app.service.mapping_service import (
    ExtentAllocator,
    Interval,
    IntervalIndex,
    MappingService,
    build_index,
    map_ranges,
    read_file,
)
from app.utils.exceptions.exceptions import CapacityError, ManifestError


def random_intervals(rng: np.random.Generator, count: int):
    cursor, out = 0, []
    for i in range(count):
        cursor += int(rng.integers(0, 64))
        length = int(rng.integers(1, 300))
        out.append(Interval(cursor, cursor + length, f"f{i % 97}", int(rng.integers(0, 10_000))))
        cursor += length
    rng.shuffle(out)
    return out, cursor


def linear_stab(intervals, offset):
    for iv in intervals:
        if iv.start <= offset < iv.end:
            return iv.path, iv.file_offset + offset - iv.start
    return None


def test_stab_matches_linear_scan(rng):
    intervals, end = random_intervals(rng, 1000)
    index = IntervalIndex(intervals)
    for offset in rng.integers(0, end + 50, size=2000).tolist():
        assert index.stab(offset) == linear_stab(intervals, offset)


def test_overlap_matches_linear_scan(rng):
    intervals, end = random_intervals(rng, 300)
    index = IntervalIndex(intervals)
    for _ in range(500):
        start = int(rng.integers(0, end))
        stop = start + int(rng.integers(1, 2000))
        expected = sorted(iv for iv in intervals if iv.start < stop and iv.end > start)
        assert index.overlap(start, stop) == expected


def fragmented_layout() -> LayoutManifest:
    return LayoutManifest(files=[
        FileLayout(path="docs/a.pdf", size=8000, extents=[
            ExtentEntry(device_offset=4096, length=4096, file_offset=0),
            ExtentEntry(device_offset=16384, length=4096, file_offset=4096),
        ]),
        FileLayout(path="docs/b.txt", size=100, extents=[
            ExtentEntry(device_offset=8192, length=4096, file_offset=0),
        ]),
    ])


def test_range_across_device_gap_maps_to_file_space():
    index = build_index(fragmented_layout())
    suspicious = [SuspiciousRange.spanning(8000, 16384 + 200 - 8000, 10.0)]
    result = map_ranges(index, suspicious)
    # both extents of a.pdf are hit and the bytes are contiguous in file space
    assert result.region_for("docs/a.pdf").ranges == [(3904, 192 + 200)]
    assert result.region_for("docs/b.txt").ranges == [(0, 100)]
    # allocation slack after b.txt and the free extent between the files
    assert [(u.device_offset, u.length) for u in result.unmapped] == [(8192 + 100, 16384 - 8292)]


def test_ranges_past_file_size_are_unmapped():
    index = build_index(fragmented_layout())
    result = map_ranges(index, [SuspiciousRange.spanning(16384 + 3904, 192, 1.0)])
    assert result.regions == []
    assert [(u.device_offset, u.length) for u in result.unmapped] == [(16384 + 3904, 192)]


def test_overlapping_extents_rejected():
    layout = LayoutManifest(files=[
        FileLayout(path="a", size=10, extents=[ExtentEntry(device_offset=0, length=4096, file_offset=0)]),
        FileLayout(path="b", size=10, extents=[ExtentEntry(device_offset=2048, length=4096, file_offset=0)]),
    ])
    with pytest.raises(ManifestError):
        build_index(layout)


def test_corpus_round_trips_through_image(settings, document_corpus):
    image = BlockImage.zeros(16384)
    layout = MappingService(settings).layout_from_corpus(document_corpus, image)
    files = sorted(p for p in Path(document_corpus).rglob("*") if p.is_file())
    assert len(layout.files) == len(files)
    for source in files:
        entry = layout.get(source.relative_to(document_corpus).as_posix())
        assert read_file(image, entry) == source.read_bytes()
        assert all(e.device_offset % 4096 == 0 for e in entry.extents)


def test_allocator_falls_back_to_fragments():
    image = BlockImage.zeros(64)  # 8 extents
    taken = LayoutManifest(files=[
        FileLayout(path="x", size=4096, extents=[ExtentEntry(device_offset=4096, length=4096, file_offset=0)]),
        FileLayout(path="y", size=4096, extents=[ExtentEntry(device_offset=4096 * 4, length=4096,
                                                             file_offset=0)]),
    ])
    allocator = ExtentAllocator(image, 4096, taken)
    assert allocator.allocate(3 * 4096) == [(5, 3)]
    assert allocator.allocate(3 * 4096) == [(0, 1), (2, 2)]
    with pytest.raises(CapacityError):
        allocator.allocate(4096)


def test_layout_file_round_trip(settings, tmp_path):
    service = MappingService(settings)
    service.save_layout(fragmented_layout(), tmp_path / "layout.json")
    assert service.load_layout(tmp_path / "layout.json") == fragmented_layout()
