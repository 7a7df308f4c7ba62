import tempfile

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from app.core.config.env import Settings
from app.domain.schema.snapshot_schema import BlockImage
from app.service.snapstore_service import SnapstoreService
from app.utils.exceptions.exceptions import ArgumentError, IntegrityError, NotFoundError, RangeError

BLOCKS = 32
BS = 512


def block(value: int) -> bytes:
    return bytes([value % 256]) * BS


write_streams = st.lists(
    st.lists(st.tuples(st.integers(0, BLOCKS - 1), st.integers(0, 255)), max_size=20),
    min_size=1, max_size=5,
)


@hsettings(max_examples=30, deadline=None)
@given(write_streams)
def test_replay_matches_sequential_apply(epochs):
    with tempfile.TemporaryDirectory() as root:
        store = SnapstoreService(root, Settings(_env_file=None))
        store.init_store(BlockImage.zeros(BLOCKS))
        naive = np.zeros(BLOCKS * BS, dtype=np.uint8)
        for epoch, writes in enumerate(epochs, start=1):
            store.record_epoch((b, block(v)) for b, v in writes)
            for b, v in writes:
                naive[b * BS:(b + 1) * BS] = v
            assert store.latest_epoch() == epoch
            assert np.array_equal(store.reconstruct(epoch).data, naive)


@hsettings(max_examples=30, deadline=None)
@given(st.lists(st.lists(st.integers(0, BLOCKS - 1), max_size=12), min_size=1, max_size=5))
def test_union_bitmap_is_per_bit_or(epochs):
    with tempfile.TemporaryDirectory() as root:
        store = SnapstoreService(root, Settings(_env_file=None))
        store.init_store(BlockImage.zeros(BLOCKS))
        for ids in epochs:
            store.record_epoch((b, block(1)) for b in ids)
        expected = [False] * BLOCKS
        for ids in epochs:
            for b in ids:
                expected[b] = True
        assert store.union_bitmaps(1, len(epochs)).bits.tolist() == expected


def test_last_write_in_epoch_wins(snapstore):
    snapstore.init_store(BlockImage.zeros(BLOCKS))
    snapshot, bitmap = snapstore.record_epoch([(3, block(1)), (5, block(2)), (3, block(9))])
    assert snapshot.block_ids.tolist() == [3, 5]
    assert snapshot.entries[0] == (3, block(9))
    assert bitmap.block_ids() == [3, 5]


def test_empty_epoch_is_recorded(snapstore):
    snapstore.init_store(BlockImage.zeros(BLOCKS))
    snapshot, bitmap = snapstore.record_epoch([])
    assert snapshot.epoch == 1
    assert snapshot.entry_count == 0
    assert bitmap.count() == 0


def test_rejects_out_of_range_block(snapstore):
    snapstore.init_store(BlockImage.zeros(BLOCKS))
    with pytest.raises(RangeError):
        snapstore.record_epoch([(BLOCKS, block(1))])


def test_rejects_short_payload(snapstore):
    snapstore.init_store(BlockImage.zeros(BLOCKS))
    with pytest.raises(ArgumentError):
        snapstore.record_epoch([(0, b"\x00" * 100)])


def test_missing_snapshot_breaks_replay(snapstore):
    snapstore.init_store(BlockImage.zeros(BLOCKS))
    for value in (1, 2, 3):
        snapstore.record_epoch([(value, block(value))])
    snapstore.repo.snapshot_path(2).unlink()
    with pytest.raises(IntegrityError):
        snapstore.reconstruct(3)
    assert snapstore.reconstruct(1).block(1) == block(1)


def test_epoch_bounds(snapstore):
    snapstore.init_store(BlockImage.zeros(BLOCKS))
    snapstore.record_epoch([(0, block(7))])
    with pytest.raises(ArgumentError):
        snapstore.reconstruct(2)
    with pytest.raises(ArgumentError):
        snapstore.load_snapshot(0)
    with pytest.raises(ArgumentError):
        snapstore.union_bitmaps(2, 1)
    assert snapstore.reconstruct(0).payload == bytes(BLOCKS * BS)


def test_record_image_captures_changed_blocks_only(snapstore):
    snapstore.init_store(BlockImage.zeros(BLOCKS))
    image = snapstore.reconstruct(0)
    image.data[BS * 4 + 10] = 0xFF
    image.data[BS * 9:BS * 11] = 7
    snapshot, _ = snapstore.record_image(image)
    assert snapshot.block_ids.tolist() == [4, 9, 10]


def test_missing_store(settings):
    store = SnapstoreService(settings=settings)
    with pytest.raises(NotFoundError):
        store.geometry()


def test_checksums_catch_corrupted_containers(snapstore):
    snapstore.init_store(BlockImage.zeros(BLOCKS))
    snapstore.record_epoch([(1, block(1))])
    snapstore.record_epoch([(2, block(2))])

    path = snapstore.repo.snapshot_path(2)
    raw = bytearray(path.read_bytes())
    raw[-40] ^= 0x01
    path.write_bytes(bytes(raw))
    with pytest.raises(IntegrityError):
        snapstore.reconstruct(2)
    assert snapstore.reconstruct(1).block(1) == block(1)

    bitmap = snapstore.repo.bitmap_path(1)
    bitmap.write_bytes(bitmap.read_bytes()[:-1])
    with pytest.raises(IntegrityError):
        snapstore.load_bitmap(1)

    baseline = snapstore.repo.root / "baseline.img"
    baseline.write_bytes(b"\x01" + baseline.read_bytes()[1:])
    with pytest.raises(IntegrityError):
        snapstore.reconstruct(0)
