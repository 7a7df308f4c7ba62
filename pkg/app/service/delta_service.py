import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
from fastapi import Depends

from app.core.config.env import Settings, get_settings
from app.domain.schema.delta_schema import AggregatedBlockRun, DeltaBlock, DeltaSnapshot, Extent
from app.domain.schema.snapshot_schema import BlockImage, DirtyBitmap
from app.service.snapstore_service import SnapstoreService
from app.utils.exceptions.exceptions import ArgumentError

logger = logging.getLogger(__name__)


def group_by_extent(dirty: DirtyBitmap, block_size: int = 512, extent_size: int = 4096) -> List[Extent]:
    """Group dirty blocks by extent and coalesce contiguous runs that stay inside one extent."""
    per_extent = extent_size // block_size
    extents: List[Extent] = []
    for block_id in dirty.block_ids():
        extent_id = block_id // per_extent
        if not extents or extents[-1].extent_id != extent_id:
            extents.append(Extent(extent_id=extent_id, size=extent_size))
        extent = extents[-1]
        extent.member_blocks.append(block_id)
        if extent.runs and extent.runs[-1].end_block == block_id:
            extent.runs[-1].length_blocks += 1
        else:
            extent.runs.append(AggregatedBlockRun(start_block=block_id, length_blocks=1))
    return extents


def diff_runs(old: np.ndarray, new: np.ndarray, min_gap_length: int = 16) -> List[Tuple[int, int]]:
    """
    Forward byte differences between two equal-length buffers as half-open spans.

    Equal runs shorter than ``min_gap_length`` between two differing bytes are
    absorbed into one span.
    """
    changed = np.flatnonzero(old != new)
    if changed.size == 0:
        return []
    # equal bytes between consecutive differences
    gaps = np.diff(changed) - 1
    breaks = np.flatnonzero(gaps >= min_gap_length)
    starts = np.concatenate(([changed[0]], changed[breaks + 1]))
    ends = np.concatenate((changed[breaks], [changed[-1]])) + 1
    return list(zip(starts.tolist(), ends.tolist()))


class DeltaService:
    def __init__(self, snapstore: SnapstoreService, settings: Optional[Settings] = None):
        self.settings = settings or snapstore.settings or get_settings()
        self.snapstore = snapstore

    def _extent_deltas(self, extent: Extent, before: BlockImage, after: BlockImage,
                       min_gap_length: int) -> List[DeltaBlock]:
        block_size = before.block_size
        deltas: List[DeltaBlock] = []
        for run in extent.runs:
            lo = run.start_block * block_size
            hi = run.end_block * block_size
            old = before.data[lo:hi]
            new = after.data[lo:hi]
            for start, end in diff_runs(old, new, min_gap_length):
                deltas.append(DeltaBlock(
                    device_offset=lo + start,
                    new_bytes=new[start:end].tobytes(),
                    old_bytes=old[start:end].tobytes(),
                ))
        return deltas

    def extract_delta(self, e_i: int, e_j: int, min_gap_length: Optional[int] = None) -> DeltaSnapshot:
        """
        Exact forward differences between reconstruct(e_i - 1) and reconstruct(e_j)
        over the extents dirtied in [e_i, e_j].

        Raises:
            ArgumentError: If e_i is 0, the window is reversed or the gap length is not positive.
            IntegrityError: If an epoch in the replay chain is missing.
        """
        delta, _ = self.extract_with_image(e_i, e_j, min_gap_length)
        return delta

    def extract_with_image(self, e_i: int, e_j: int,
                           min_gap_length: Optional[int] = None) -> Tuple[DeltaSnapshot, BlockImage]:
        """
        Like ``extract_delta``, also returning the replayed image at e_j.

        Raises:
            ArgumentError: If e_i is 0, the window is reversed or the gap length is not positive.
            IntegrityError: If an epoch in the replay chain is missing.
        """
        min_gap_length = self.settings.MIN_GAP_LENGTH if min_gap_length is None else min_gap_length
        if e_i < 1:
            raise ArgumentError(detail="Delta extraction needs e_i >= 1; epoch 0 has no pre-image")
        if e_i > e_j:
            raise ArgumentError(detail=f"Epoch window is reversed ({e_i} > {e_j})")
        if min_gap_length < 1:
            raise ArgumentError(detail="min_gap_length must be positive")

        before = self.snapstore.reconstruct(e_i - 1)
        after = before.clone()
        for epoch in range(e_i, e_j + 1):
            self.snapstore.load_snapshot(epoch).apply_to(after)
        dirty = self.snapstore.union_bitmaps(e_i, e_j)
        extents = group_by_extent(dirty, before.block_size, self.settings.EXTENT_SIZE)

        if self.settings.WORKERS > 1 and len(extents) > 1:
            with ThreadPoolExecutor(max_workers=self.settings.WORKERS) as pool:
                parts = list(pool.map(lambda x: self._extent_deltas(x, before, after, min_gap_length), extents))
        else:
            parts = [self._extent_deltas(x, before, after, min_gap_length) for x in extents]

        deltas = sorted((d for part in parts for d in part), key=lambda d: d.device_offset)
        logger.info("Delta [%d, %d]: %d dirty blocks in %d extents, %d delta blocks, %d bytes",
                    e_i, e_j, dirty.count(), len(extents), len(deltas), sum(d.length for d in deltas))
        delta = DeltaSnapshot(e_i=e_i, e_j=e_j, min_gap_length=min_gap_length, extents=extents, deltas=deltas)
        return delta, after


def apply_delta(image: BlockImage, delta: DeltaSnapshot) -> BlockImage:
    """Write every delta's new bytes onto a copy of ``image``."""
    out = image.clone()
    for d in delta.deltas:
        out.data[d.device_offset:d.end] = np.frombuffer(d.new_bytes, dtype=np.uint8)
    return out


def dump_json(delta: DeltaSnapshot) -> dict:
    return {
        "e_i": delta.e_i,
        "e_j": delta.e_j,
        "min_gap_length": delta.min_gap_length,
        "extents": [
            {"extent_id": x.extent_id, "runs": [[r.start_block, r.length_blocks] for r in x.runs]}
            for x in delta.extents
        ],
        "deltas": [
            {
                "device_offset": d.device_offset,
                "length": d.length,
                "old_sha256": hashlib.sha256(d.old_bytes).hexdigest(),
                "new_sha256": hashlib.sha256(d.new_bytes).hexdigest(),
            }
            for d in delta.deltas
        ],
    }


def get_delta_service(settings: Settings = Depends(get_settings)) -> DeltaService:
    return DeltaService(SnapstoreService(settings=settings), settings)
