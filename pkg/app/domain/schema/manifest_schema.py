import re
from enum import Enum
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

SHA256_HEX = re.compile(r"^[0-9a-f]{64}$")
MANIFEST_FORMAT_VERSION = 1


def component_key(container: str, member: str | int) -> str:
    return f"{container}::{member}"


class WhitelistStatus(str, Enum):
    VERIFIED = "Verified"
    UNKNOWN = "Unknown"
    MISMATCH = "Mismatch"


class WhitelistDecision(BaseModel):
    status: WhitelistStatus
    identifier: str
    digest: str
    expected: Optional[str] = None
    mismatched_blocks: List[int] = Field(default_factory=list)

    @property
    def verified(self) -> bool:
        return self.status == WhitelistStatus.VERIFIED


class ComponentHash(BaseModel):
    container: str
    member: str
    sha256: str
    payload: Literal["raw", "decoded"] = "raw"

    @field_validator("sha256")
    @classmethod
    def check_digest(cls, value: str) -> str:
        if not SHA256_HEX.match(value):
            raise ValueError("digest must be 64 lowercase hex characters")
        return value


class BlockHashes(BaseModel):
    """Per-block digests of one media file, so partial reads can be verified alone."""
    size: int = Field(..., ge=0)
    block_size: int = Field(512, gt=0)
    sha256: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_blocks(self):
        if len(self.sha256) != -(-self.size // self.block_size):
            raise ValueError("one digest per block of the file is required")
        if not all(SHA256_HEX.match(d) for d in self.sha256):
            raise ValueError("digest must be 64 lowercase hex characters")
        return self


class TrustedManifest(BaseModel):
    """SHA-256 whitelist of published files and opaque container components."""
    format_version: int = MANIFEST_FORMAT_VERSION
    file_hashes: Dict[str, str] = Field(default_factory=dict)
    block_hashes: Dict[str, BlockHashes] = Field(default_factory=dict)
    component_hashes: Dict[str, ComponentHash] = Field(default_factory=dict)
    skipped: List[str] = Field(default_factory=list)

    model_config = {
        "json_schema_extra": {
            "example": {
                "format_version": 1,
                "file_hashes": {
                    "media/photo.jpg": "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
                },
                "component_hashes": {},
                "skipped": []
            }
        }
    }

    @field_validator("file_hashes")
    @classmethod
    def check_file_digests(cls, value: Dict[str, str]) -> Dict[str, str]:
        for path, digest in value.items():
            if not SHA256_HEX.match(digest):
                raise ValueError(f"invalid digest for {path}")
        return value

    def component(self, container: str, member: str | int) -> Optional[ComponentHash]:
        return self.component_hashes.get(component_key(container, member))

    def digests(self) -> set[str]:
        return set(self.file_hashes.values()) | {c.sha256 for c in self.component_hashes.values()}


class ManifestBuildRequest(BaseModel):
    corpus_dir: str = Field(..., description="Directory of published files to trust")
    out_path: str = Field(..., description="Where to write the manifest JSON")
    media_extensions: Optional[List[str]] = None

    model_config = {
        "json_schema_extra": {
            "example": {"corpus_dir": "corpus/clean", "out_path": "manifest.json"}
        }
    }
