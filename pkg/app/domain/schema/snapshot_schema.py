from typing import Iterator, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

BlockWrite = Tuple[int, bytes]


class BlockImage(BaseModel):
    """A flat block-device image: block_count blocks of block_size bytes."""
    block_size: int = Field(512, gt=0)
    block_count: int = Field(..., ge=0)
    data: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_length(self):
        if self.data.dtype != np.uint8 or self.data.ndim != 1:
            raise ValueError("image data must be a flat uint8 array")
        if self.data.size != self.block_count * self.block_size:
            raise ValueError(
                f"payload length {self.data.size} != block_count x block_size "
                f"({self.block_count} x {self.block_size})"
            )
        return self

    @classmethod
    def zeros(cls, block_count: int, block_size: int = 512) -> "BlockImage":
        return cls(block_size=block_size, block_count=block_count,
                   data=np.zeros(block_count * block_size, dtype=np.uint8))

    @classmethod
    def from_bytes(cls, payload: bytes, block_size: int = 512) -> "BlockImage":
        data = np.frombuffer(payload, dtype=np.uint8).copy()
        return cls(block_size=block_size, block_count=data.size // block_size, data=data)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def payload(self) -> bytes:
        return self.data.tobytes()

    def clone(self) -> "BlockImage":
        return BlockImage(block_size=self.block_size, block_count=self.block_count, data=self.data.copy())

    def block(self, block_id: int) -> bytes:
        start = block_id * self.block_size
        return self.data[start:start + self.block_size].tobytes()

    def read(self, offset: int, length: int) -> bytes:
        return self.data[offset:offset + length].tobytes()


class MutationSnapshot(BaseModel):
    """Last-written version of every block dirtied during one epoch, sorted by block id."""
    epoch: int = Field(..., ge=0)
    block_size: int = Field(512, gt=0)
    block_ids: np.ndarray
    payloads: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_entries(self):
        ids = self.block_ids
        if ids.ndim != 1:
            raise ValueError("block_ids must be one-dimensional")
        if self.payloads.shape != (ids.size, self.block_size):
            raise ValueError("payloads must hold one block_size row per entry")
        if ids.size > 1 and not np.all(ids[1:] > ids[:-1]):
            raise ValueError("entries must be strictly ascending by block_id")
        return self

    @classmethod
    def empty(cls, epoch: int, block_size: int = 512) -> "MutationSnapshot":
        return cls(epoch=epoch, block_size=block_size,
                   block_ids=np.zeros(0, dtype=np.int64),
                   payloads=np.zeros((0, block_size), dtype=np.uint8))

    @property
    def entry_count(self) -> int:
        return int(self.block_ids.size)

    @property
    def entries(self) -> List[BlockWrite]:
        return list(self.iter_entries())

    def iter_entries(self) -> Iterator[BlockWrite]:
        for block_id, row in zip(self.block_ids.tolist(), self.payloads):
            yield block_id, row.tobytes()

    def apply_to(self, image: BlockImage) -> None:
        """Write this snapshot's blocks into ``image`` in place."""
        if self.entry_count == 0:
            return
        blocks = image.data.reshape(image.block_count, image.block_size)
        blocks[self.block_ids] = self.payloads


class DirtyBitmap(BaseModel):
    """Which blocks an epoch (or a union of epochs) updated."""
    epoch: int = Field(..., ge=0)
    bits: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_bits(self):
        if self.bits.dtype != np.bool_ or self.bits.ndim != 1:
            raise ValueError("bits must be a flat boolean array")
        return self

    @classmethod
    def from_ids(cls, epoch: int, block_count: int, block_ids) -> "DirtyBitmap":
        bits = np.zeros(block_count, dtype=bool)
        bits[np.asarray(list(block_ids), dtype=np.int64)] = True
        return cls(epoch=epoch, bits=bits)

    @property
    def block_count(self) -> int:
        return int(self.bits.size)

    def block_ids(self) -> List[int]:
        return np.flatnonzero(self.bits).tolist()

    def count(self) -> int:
        return int(self.bits.sum())

    def __or__(self, other: "DirtyBitmap") -> "DirtyBitmap":
        return DirtyBitmap(epoch=max(self.epoch, other.epoch), bits=self.bits | other.bits)
