from typing import List, Literal, Tuple

from pydantic import BaseModel, Field, model_validator

from app.domain.schema.delta_schema import DeltaBlock

# (block_id, start, end) with start/end relative to the block
BlockSlice = Tuple[int, int, int]


class SawaParams(BaseModel):
    w: int = Field(16, ge=1, description="Window width in bytes")
    s: int = Field(8, ge=1, description="Stride in bytes")
    tau: float = Field(350.0, gt=0, description="Chi-squared acceptance threshold")
    shrink: Literal["bisect", "exact"] = Field("bisect", description="How the expanded window is shrunk back")

    @model_validator(mode="after")
    def check_stride(self):
        if self.s > self.w:
            raise ValueError("stride must not exceed the window width")
        return self

    model_config = {
        "json_schema_extra": {
            "example": {"w": 16, "s": 8, "tau": 350.0, "shrink": "bisect"}
        }
    }


class SuspiciousRange(BaseModel):
    device_offset: int = Field(..., ge=0)
    length: int = Field(..., ge=1)
    covered_blocks: List[BlockSlice] = Field(default_factory=list)
    chi2_final: float

    @property
    def end(self) -> int:
        return self.device_offset + self.length

    @classmethod
    def spanning(cls, device_offset: int, length: int, chi2_final: float, block_size: int = 512) -> "SuspiciousRange":
        return cls(device_offset=device_offset, length=length, chi2_final=chi2_final,
                   covered_blocks=tile_blocks(device_offset, length, block_size))


class SawaResult(BaseModel):
    params: SawaParams
    suspicious: List[SuspiciousRange] = Field(default_factory=list)
    forwarded_small: List[DeltaBlock] = Field(default_factory=list)
    scanned_bytes: int = 0

    def positive_blocks(self, block_size: int = 512) -> set[int]:
        """Blocks touched by any suspicious range or forwarded small delta."""
        blocks = {b for r in self.suspicious for b, _, _ in r.covered_blocks}
        for d in self.forwarded_small:
            blocks.update(range(d.device_offset // block_size, (d.end - 1) // block_size + 1))
        return blocks


def tile_blocks(device_offset: int, length: int, block_size: int = 512) -> List[BlockSlice]:
    tiles: List[BlockSlice] = []
    pos, end = device_offset, device_offset + length
    while pos < end:
        block_id = pos // block_size
        base = block_id * block_size
        stop = min(end, base + block_size)
        tiles.append((block_id, pos - base, stop - base))
        pos = stop
    return tiles
