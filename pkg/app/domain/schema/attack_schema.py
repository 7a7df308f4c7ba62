import re
from enum import Enum
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator

from app.domain.schema.layout_schema import LayoutManifest

# (file_offset, length)
ByteRange = Tuple[int, int]


class Fast(BaseModel):
    """Encrypt only the first ``n`` bytes."""
    kind: Literal["fast"] = "fast"
    n: int = Field(..., ge=1)

    @property
    def label(self) -> str:
        return f"fast:{self.n}"


class SkipStep(BaseModel):
    """Encrypt ``n`` bytes, skip ``s`` bytes, repeat to EOF starting at ``start``."""
    kind: Literal["skip"] = "skip"
    n: int = Field(..., ge=1)
    s: int = Field(..., ge=0)
    start: int = Field(0, ge=0)

    @property
    def label(self) -> str:
        suffix = f"@{self.start}" if self.start else ""
        return f"skip:{self.n},{self.s}{suffix}"


class Animagus(BaseModel):
    """Encrypt floor(f percent) of the file's blocks, chosen at random."""
    kind: Literal["animagus"] = "animagus"
    f: float = Field(..., gt=0, le=100)

    @property
    def label(self) -> str:
        return f"animagus:{self.f:g}"


AttackPattern = Annotated[Union[Fast, SkipStep, Animagus], Field(discriminator="kind")]


class CampaignMode(str, Enum):
    CLONE = "clone"
    INPLACE = "inplace"


class CipherSpec(BaseModel):
    key_hex: str = Field(..., description="256-bit AES key as 64 hex characters")
    algorithm: Literal["AES-256-CTR"] = "AES-256-CTR"

    model_config = {
        "json_schema_extra": {
            "example": {"key_hex": "00" * 32, "algorithm": "AES-256-CTR"}
        }
    }

    @field_validator("key_hex")
    @classmethod
    def check_key(cls, value: str) -> str:
        value = value.lower()
        if not re.fullmatch(r"[0-9a-f]{64}", value):
            raise ValueError("key must be 64 hex characters")
        return value

    @property
    def key(self) -> bytes:
        return bytes.fromhex(self.key_hex)


class GroundTruth(BaseModel):
    """Encrypted byte ranges per file and the device blocks holding them."""
    block_size: int = 512
    files: Dict[str, List[ByteRange]] = Field(default_factory=dict)
    device_blocks: List[int] = Field(default_factory=list)
    positive_files: List[str] = Field(default_factory=list)
    negative_files: List[str] = Field(default_factory=list)

    @property
    def encrypted_bytes(self) -> int:
        return sum(n for ranges in self.files.values() for _, n in ranges)

    @property
    def block_count(self) -> int:
        return len(self.device_blocks)

    def file_labels(self) -> Dict[str, bool]:
        labels = {p: False for p in self.negative_files}
        labels.update({p: True for p in self.positive_files})
        return labels


class CampaignResult(BaseModel):
    epoch: int
    pattern: str = Field(..., description="Pattern label, e.g. skip:64,128 or blackbasta")
    mode: CampaignMode = CampaignMode.CLONE
    seed: int = 0
    ground_truth: GroundTruth
    layout: LayoutManifest


class CampaignRequest(BaseModel):
    pattern: str = Field(..., description="fast:N | skip:N,S | animagus:F | blackbasta")
    key_hex: Optional[str] = None
    seed: int = 0
    mode: CampaignMode = CampaignMode.CLONE
    layout_path: str
    targets: Optional[List[str]] = None
    layout_out: Optional[str] = Field(None, description="Where to write the extended layout; defaults to layout_path")
    result_path: Optional[str] = Field(None, description="Where to write the campaign result with ground truth")

    model_config = {
        "json_schema_extra": {
            "example": {"pattern": "skip:64,128", "seed": 7, "mode": "clone", "layout_path": "layout.json"}
        }
    }
