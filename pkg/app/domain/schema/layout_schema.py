from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from app.utils.helper import normalize_path


class ExtentEntry(BaseModel):
    device_offset: int = Field(..., ge=0)
    length: int = Field(..., ge=1)
    file_offset: int = Field(..., ge=0)

    @property
    def device_end(self) -> int:
        return self.device_offset + self.length


class FileLayout(BaseModel):
    path: str
    size: int = Field(..., ge=0)
    extents: List[ExtentEntry] = Field(default_factory=list)

    @field_validator("path")
    @classmethod
    def canonical_path(cls, value: str) -> str:
        return normalize_path(value)

    @model_validator(mode="after")
    def check_extents(self):
        ordered = sorted(self.extents, key=lambda e: e.file_offset)
        for prev, cur in zip(ordered, ordered[1:]):
            if cur.file_offset < prev.file_offset + prev.length:
                raise ValueError(f"{self.path}: extents overlap in file-offset space")
        # allocation may be padded past size, but every extent must start inside the file
        for e in self.extents:
            if e.file_offset >= self.size:
                raise ValueError(f"{self.path}: extent starts past end of file")
        return self

    def data_spans(self) -> List[Tuple[int, int, int]]:
        """(device_offset, device_end, file_offset) of each extent clipped to the file size."""
        spans = []
        for e in self.extents:
            length = min(e.length, self.size - e.file_offset)
            spans.append((e.device_offset, e.device_offset + length, e.file_offset))
        return spans


class LayoutManifest(BaseModel):
    """File path to device extent mapping written beside a block image."""
    block_size: int = 512
    extent_size: int = 4096
    files: List[FileLayout] = Field(default_factory=list)

    model_config = {
        "json_schema_extra": {
            "example": {
                "block_size": 512,
                "extent_size": 4096,
                "files": [
                    {"path": "docs/report.pdf", "size": 105116,
                     "extents": [{"device_offset": 4096, "length": 105116, "file_offset": 0}]}
                ]
            }
        }
    }

    def by_path(self) -> Dict[str, FileLayout]:
        return {f.path: f for f in self.files}

    def get(self, path: str) -> Optional[FileLayout]:
        return self.by_path().get(normalize_path(path))


class FileRegion(BaseModel):
    path: str
    ranges: List[Tuple[int, int]] = Field(default_factory=list, description="(file_offset, length), coalesced")

    @property
    def total_bytes(self) -> int:
        return sum(length for _, length in self.ranges)


class UnmappedRange(BaseModel):
    device_offset: int
    length: int


class MappingResult(BaseModel):
    regions: List[FileRegion] = Field(default_factory=list)
    unmapped: List[UnmappedRange] = Field(default_factory=list)

    def region_for(self, path: str) -> Optional[FileRegion]:
        return next((r for r in self.regions if r.path == path), None)
