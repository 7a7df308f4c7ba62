import logging
from typing import Iterable, Optional, Tuple

import numpy as np
from fastapi import Depends

from app.core.config.env import Settings, get_settings
from app.domain.schema.snapshot_schema import BlockImage, BlockWrite, DirtyBitmap, MutationSnapshot
from app.repository.snapshot_repo import SnapshotRepository
from app.utils.exceptions.exceptions import ArgumentError, FavscanError, IntegrityError, RangeError

logger = logging.getLogger(__name__)


class SnapstoreService:
    """Per-epoch mutation snapshots over a baseline block image."""

    def __init__(self, store_dir: Optional[str] = None, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        self.repo = SnapshotRepository(store_dir or self.settings.STORE_DIR)

    def _raise(self, err: Exception):
        if isinstance(err, FavscanError):
            raise err
        raise IntegrityError(detail="Snapshot store access failed", data=str(err))

    def init_store(self, baseline: BlockImage) -> dict:
        """Create a store whose epoch 0 is ``baseline``."""
        if baseline.block_size != self.settings.BLOCK_SIZE:
            raise ArgumentError(detail=f"Store block size is fixed at {self.settings.BLOCK_SIZE}")
        meta, err = self.repo.init_store(baseline)
        if err:
            self._raise(err)
        logger.info("Initialized snapshot store at %s (%d blocks)", self.repo.root, baseline.block_count)
        return meta

    def geometry(self) -> Tuple[int, int]:
        meta, err = self.repo.get_meta()
        if err:
            self._raise(err)
        return meta["block_size"], meta["block_count"]

    def latest_epoch(self) -> int:
        epoch, err = self.repo.latest_epoch()
        if err:
            self._raise(err)
        return epoch

    def baseline(self) -> BlockImage:
        image, err = self.repo.get_baseline()
        if err:
            self._raise(err)
        return image

    def load_snapshot(self, epoch: int) -> MutationSnapshot:
        if epoch < 1:
            raise ArgumentError(detail="Epoch 0 is the baseline image and has no mutation snapshot")
        snapshot, err = self.repo.get_snapshot(epoch)
        if err:
            self._raise(err)
        return snapshot

    def load_bitmap(self, epoch: int) -> DirtyBitmap:
        _, block_count = self.geometry()
        if epoch < 1:
            return DirtyBitmap(epoch=0, bits=np.zeros(block_count, dtype=bool))
        bitmap, err = self.repo.get_bitmap(epoch, block_count)
        if err:
            self._raise(err)
        return bitmap

    def record_epoch(self, writes: Iterable[BlockWrite]) -> Tuple[MutationSnapshot, DirtyBitmap]:
        """
        Aggregate an epoch's write stream and persist it as the next epoch.

        Writes are applied in order; the snapshot keeps only the last payload
        per block.

        Returns:
            Tuple[MutationSnapshot, DirtyBitmap]: The persisted snapshot and bitmap.

        Raises:
            RangeError: If a block id falls outside the device.
            ArgumentError: If a payload is not exactly one block long.
        """
        block_size, block_count = self.geometry()
        last: dict[int, bytes] = {}
        for block_id, payload in writes:
            if not 0 <= block_id < block_count:
                raise RangeError(detail=f"Block id {block_id} outside device of {block_count} blocks",
                                 data={"block_id": block_id})
            if len(payload) != block_size:
                raise ArgumentError(detail=f"Write to block {block_id} is {len(payload)} bytes, expected {block_size}")
            last[block_id] = bytes(payload)

        epoch = self.latest_epoch() + 1
        ids = np.array(sorted(last), dtype=np.int64)
        if ids.size:
            payloads = np.frombuffer(b"".join(last[i] for i in ids.tolist()), dtype=np.uint8)
            payloads = payloads.reshape(ids.size, block_size)
        else:
            payloads = np.zeros((0, block_size), dtype=np.uint8)
        snapshot = MutationSnapshot(epoch=epoch, block_size=block_size, block_ids=ids, payloads=payloads)
        bitmap = DirtyBitmap.from_ids(epoch, block_count, ids)

        _, err = self.repo.save_epoch(snapshot, bitmap)
        if err:
            self._raise(err)
        logger.info("Recorded epoch %d with %d dirty blocks", epoch, snapshot.entry_count)
        return snapshot, bitmap

    def record_image(self, image: BlockImage, previous: Optional[BlockImage] = None) -> Tuple[MutationSnapshot, DirtyBitmap]:
        """Record as one epoch every block where ``image`` differs from ``previous`` (or the latest state)."""
        previous = previous if previous is not None else self.reconstruct(self.latest_epoch())
        old = previous.data.reshape(previous.block_count, previous.block_size)
        new = image.data.reshape(image.block_count, image.block_size)
        changed = np.flatnonzero((old != new).any(axis=1))
        return self.record_epoch((int(i), new[i].tobytes()) for i in changed)

    def reconstruct(self, epoch: int) -> BlockImage:
        """
        Replay snapshots 1..epoch over the baseline.

        Raises:
            ArgumentError: If the epoch is negative or beyond the latest one.
            IntegrityError: If an intermediate snapshot is missing.
        """
        if epoch < 0:
            raise ArgumentError(detail="Epoch must be non-negative")
        latest = self.latest_epoch()
        if epoch > latest:
            raise ArgumentError(detail=f"Epoch {epoch} does not exist (latest is {latest})")
        image = self.baseline()
        for e in range(1, epoch + 1):
            snapshot, err = self.repo.get_snapshot(e)
            if err:
                if isinstance(err, IntegrityError):
                    raise IntegrityError(detail=f"Replay chain broken at epoch {e}", data={"epoch": e})
                self._raise(err)
            snapshot.apply_to(image)
        return image

    def union_bitmaps(self, e_i: int, e_j: int) -> DirtyBitmap:
        """OR-reduce the dirty bitmaps of epochs e_i..e_j inclusive."""
        if e_i > e_j:
            raise ArgumentError(detail=f"Epoch window is reversed ({e_i} > {e_j})")
        result = self.load_bitmap(e_i)
        for e in range(e_i + 1, e_j + 1):
            result = result | self.load_bitmap(e)
        return result


def get_snapstore_service(settings: Settings = Depends(get_settings)) -> SnapstoreService:
    return SnapstoreService(settings=settings)
