import hashlib
import json
import os
import struct
from pathlib import Path
from typing import Any, List, Optional, Tuple

import numpy as np

from app.domain.schema.snapshot_schema import BlockImage, DirtyBitmap, MutationSnapshot
from app.utils.exceptions.exceptions import IntegrityError, NotFoundError

MAGIC = b"RSNAP\x00"
FORMAT_VERSION = 2
HEADER = struct.Struct("<6sBQIQ")
STORE_META = "store.json"
BASELINE = "baseline.img"
# every container file ends with the SHA-256 of the bytes before it
CHECKSUM_SIZE = 32


def _wrap_return(result: Any) -> Tuple[Any, None]:
    return result, None
def _wrap_error(e: Exception) -> Tuple[None, Exception]:
    return None, e


def seal(body: bytes) -> bytes:
    return body + hashlib.sha256(body).digest()


def unseal(raw: bytes, what: str) -> bytes:
    """
    Strip and verify the checksum trailer.

    Raises:
        ValueError: If the trailer is missing or does not match.
    """
    if len(raw) < CHECKSUM_SIZE:
        raise ValueError(f"truncated {what}")
    body, digest = raw[:-CHECKSUM_SIZE], raw[-CHECKSUM_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise ValueError(f"{what} checksum mismatch")
    return body


def _record_dtype(block_size: int) -> np.dtype:
    return np.dtype([("block_id", "<u8"), ("payload", "u1", (block_size,))])


def encode_snapshot(snapshot: MutationSnapshot) -> bytes:
    """Serialize a snapshot to the RSNAP container layout."""
    header = HEADER.pack(MAGIC, FORMAT_VERSION, snapshot.epoch, snapshot.block_size, snapshot.entry_count)
    records = np.zeros(snapshot.entry_count, dtype=_record_dtype(snapshot.block_size))
    records["block_id"] = snapshot.block_ids
    records["payload"] = snapshot.payloads
    return seal(header + records.tobytes())


def decode_snapshot(raw: bytes) -> MutationSnapshot:
    raw = unseal(raw, "snapshot")
    if len(raw) < HEADER.size:
        raise ValueError("truncated snapshot header")
    magic, version, epoch, block_size, count = HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ValueError("bad snapshot magic")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    dtype = _record_dtype(block_size)
    body = raw[HEADER.size:]
    if len(body) != count * dtype.itemsize:
        raise ValueError("snapshot record section length does not match entry count")
    records = np.frombuffer(body, dtype=dtype)
    return MutationSnapshot(
        epoch=epoch,
        block_size=block_size,
        block_ids=records["block_id"].astype(np.int64),
        payloads=np.ascontiguousarray(records["payload"]),
    )


def encode_bitmap(bitmap: DirtyBitmap) -> bytes:
    return seal(np.packbits(bitmap.bits, bitorder="little").tobytes())


def decode_bitmap(raw: bytes, epoch: int, block_count: int) -> DirtyBitmap:
    raw = unseal(raw, "bitmap")
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little", count=block_count)
    return DirtyBitmap(epoch=epoch, bits=bits.astype(bool))


class SnapshotRepository:
    """
    On-disk snapshot store: a raw baseline image, one RSNAP file per epoch and a
    packed dirty bitmap beside it.
    """

    def __init__(self, root: str | os.PathLike):
        """
        Initialize the SnapshotRepository.

        Args:
            root: Directory holding the store.
        """
        self.root = Path(root)

    def snapshot_path(self, epoch: int) -> Path:
        return self.root / f"epoch-{epoch:08d}.rsnap"

    def bitmap_path(self, epoch: int) -> Path:
        return self.root / f"epoch-{epoch:08d}.bitmap"

    def init_store(self, baseline: BlockImage):
        """
        Create the store directory, write the baseline image and the store metadata.

        Returns:
            dict: The store metadata.
        """
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            (self.root / BASELINE).write_bytes(baseline.payload)
            meta = {
                "format_version": FORMAT_VERSION,
                "block_size": baseline.block_size,
                "block_count": baseline.block_count,
                "baseline_sha256": hashlib.sha256(baseline.payload).hexdigest(),
            }
            (self.root / STORE_META).write_text(json.dumps(meta, indent=2))
            return _wrap_return(meta)
        except Exception as e:
            return _wrap_error(e)

    def get_meta(self):
        try:
            path = self.root / STORE_META
            if not path.exists():
                return None, NotFoundError(detail=f"No snapshot store at {self.root}")
            return _wrap_return(json.loads(path.read_text()))
        except Exception as e:
            return _wrap_error(e)

    def get_baseline(self):
        """
        Read the epoch-0 image.

        Returns:
            BlockImage: The baseline image.
        """
        meta, err = self.get_meta()
        if err:
            return _wrap_error(err)
        try:
            payload = (self.root / BASELINE).read_bytes()
            if len(payload) != meta["block_size"] * meta["block_count"]:
                return None, IntegrityError(detail="Baseline image size does not match store metadata")
            if hashlib.sha256(payload).hexdigest() != meta.get("baseline_sha256"):
                return None, IntegrityError(detail="Baseline image checksum does not match store metadata")
            return _wrap_return(BlockImage.from_bytes(payload, meta["block_size"]))
        except Exception as e:
            return _wrap_error(e)

    def list_epochs(self):
        try:
            epochs: List[int] = sorted(
                int(p.stem.split("-")[1]) for p in self.root.glob("epoch-*.rsnap")
            )
            return _wrap_return(epochs)
        except Exception as e:
            return _wrap_error(e)

    def latest_epoch(self):
        epochs, err = self.list_epochs()
        if err:
            return _wrap_error(err)
        return _wrap_return(epochs[-1] if epochs else 0)

    def save_epoch(self, snapshot: MutationSnapshot, bitmap: DirtyBitmap):
        """
        Persist a snapshot and its bitmap. The bitmap is written first so a
        snapshot file on disk always has its sibling.
        """
        try:
            path = self.snapshot_path(snapshot.epoch)
            if path.exists():
                return None, IntegrityError(detail=f"Epoch {snapshot.epoch} already recorded")
            self.bitmap_path(bitmap.epoch).write_bytes(encode_bitmap(bitmap))
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(encode_snapshot(snapshot))
            tmp.replace(path)
            return _wrap_return(snapshot.epoch)
        except Exception as e:
            return _wrap_error(e)

    def get_snapshot(self, epoch: int):
        """
        Load one epoch's mutation snapshot.

        Returns:
            MutationSnapshot: The decoded snapshot.
        """
        try:
            path = self.snapshot_path(epoch)
            if not path.exists():
                return None, IntegrityError(detail=f"Mutation snapshot for epoch {epoch} is missing",
                                            data={"epoch": epoch})
            snapshot = decode_snapshot(path.read_bytes())
            if snapshot.epoch != epoch:
                return None, IntegrityError(detail=f"Snapshot file for epoch {epoch} holds epoch {snapshot.epoch}")
            return _wrap_return(snapshot)
        except ValueError as e:
            return None, IntegrityError(detail=f"Corrupt snapshot for epoch {epoch}", data=str(e))
        except Exception as e:
            return _wrap_error(e)

    def get_bitmap(self, epoch: int, block_count: Optional[int] = None):
        """
        Load one epoch's dirty bitmap.

        Returns:
            DirtyBitmap: The decoded bitmap.
        """
        try:
            if block_count is None:
                meta, err = self.get_meta()
                if err:
                    return _wrap_error(err)
                block_count = meta["block_count"]
            path = self.bitmap_path(epoch)
            if not path.exists():
                return None, IntegrityError(detail=f"Dirty bitmap for epoch {epoch} is missing",
                                            data={"epoch": epoch})
            return _wrap_return(decode_bitmap(path.read_bytes(), epoch, block_count))
        except ValueError as e:
            return None, IntegrityError(detail=f"Corrupt dirty bitmap for epoch {epoch}", data=str(e))
        except Exception as e:
            return _wrap_error(e)
