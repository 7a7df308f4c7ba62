from typing import List, Optional

from pydantic import BaseModel, Field, model_validator


class AggregatedBlockRun(BaseModel):
    start_block: int = Field(..., ge=0)
    length_blocks: int = Field(..., ge=1)

    @property
    def end_block(self) -> int:
        return self.start_block + self.length_blocks


class Extent(BaseModel):
    """A fixed-size device region holding dirty blocks of an epoch window."""
    extent_id: int = Field(..., ge=0)
    size: int = Field(4096, gt=0)
    member_blocks: List[int] = Field(default_factory=list)
    runs: List[AggregatedBlockRun] = Field(default_factory=list)


class DeltaBlock(BaseModel):
    device_offset: int = Field(..., ge=0)
    new_bytes: bytes
    old_bytes: bytes

    @model_validator(mode="after")
    def check_lengths(self):
        if len(self.new_bytes) != len(self.old_bytes):
            raise ValueError("new_bytes and old_bytes must have equal length")
        if not self.new_bytes:
            raise ValueError("a delta block holds at least one byte")
        return self

    @property
    def length(self) -> int:
        return len(self.new_bytes)

    @property
    def end(self) -> int:
        return self.device_offset + self.length


class DeltaSnapshot(BaseModel):
    e_i: int = Field(..., ge=1)
    e_j: int = Field(..., ge=1)
    min_gap_length: int = Field(16, ge=1)
    extents: List[Extent] = Field(default_factory=list)
    deltas: List[DeltaBlock] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_order(self):
        for prev, cur in zip(self.deltas, self.deltas[1:]):
            if cur.device_offset < prev.end:
                raise ValueError("delta blocks must be sorted and non-overlapping")
        return self

    @property
    def dirty_blocks(self) -> List[int]:
        return [b for extent in self.extents for b in extent.member_blocks]

    def extent_blocks(self, block_size: int = 512, block_count: Optional[int] = None) -> List[int]:
        """Every block of every dirty extent, clipped to the device."""
        blocks: List[int] = []
        for extent in self.extents:
            per_extent = extent.size // block_size
            first = extent.extent_id * per_extent
            last = first + per_extent if block_count is None else min(first + per_extent, block_count)
            blocks.extend(range(first, last))
        return blocks

    @property
    def changed_bytes(self) -> int:
        return sum(d.length for d in self.deltas)
