import json

import pytest
from pydantic import ValidationError

from app.domain.schema.manifest_schema import ComponentHash, WhitelistStatus
from app.service.manifest_service import (
    ManifestService,
    check,
    check_blocks,
    lookup_digest,
    sha256_hex,
    touched_blocks,
)
from app.utils.exceptions.exceptions import ManifestError, NotFoundError

MEDIA_SUFFIXES = (".jpg", ".png", ".mp3", ".mp4")


def test_media_hashed_whole(mixed_manifest, mixed_corpus_dir):
    assert len(mixed_manifest.file_hashes) == 8
    for rel, digest in mixed_manifest.file_hashes.items():
        assert rel.endswith(MEDIA_SUFFIXES)
        assert digest == sha256_hex((mixed_corpus_dir / rel).read_bytes())


def test_opaque_components_recorded(mixed_manifest):
    containers = {entry.container for entry in mixed_manifest.component_hashes.values()}
    # every archive carries a stored photo, every PDF an embedded font
    assert {"zip/zip_000.zip", "zip/zip_001.zip", "pdf/pdf_000.pdf", "pdf/pdf_001.pdf"} <= containers
    pdf_entries = [e for e in mixed_manifest.component_hashes.values() if e.container.endswith(".pdf")]
    assert all(e.payload == "decoded" for e in pdf_entries)
    assert all(e.container.endswith((".zip", ".docx", ".pptx", ".xlsx", ".pdf")) or "!" in e.container
               for e in mixed_manifest.component_hashes.values())


def test_check_statuses(mixed_manifest, mixed_corpus_dir):
    rel = "jpg/jpg_000.jpg"
    data = (mixed_corpus_dir / rel).read_bytes()
    assert check(mixed_manifest, data, rel).status == WhitelistStatus.VERIFIED
    flipped = bytes([data[0] ^ 1]) + data[1:]
    decision = check(mixed_manifest, flipped, rel)
    assert decision.status == WhitelistStatus.MISMATCH
    assert decision.expected == sha256_hex(data)
    assert check(mixed_manifest, data, "elsewhere/photo.jpg").status == WhitelistStatus.UNKNOWN
    assert check(None, data, rel).status == WhitelistStatus.UNKNOWN
    assert lookup_digest(mixed_manifest, sha256_hex(data))
    assert not lookup_digest(mixed_manifest, sha256_hex(flipped))
    assert not lookup_digest(None, sha256_hex(data))


def test_component_identifiers(mixed_manifest):
    entry = next(iter(mixed_manifest.component_hashes.values()))
    decision = check(mixed_manifest, b"not the member", (entry.container, entry.member))
    assert decision.status == WhitelistStatus.MISMATCH
    assert decision.identifier == f"{entry.container}::{entry.member}"


def test_save_and_load(settings, mixed_manifest, tmp_path):
    service = ManifestService(settings)
    path = service.save(mixed_manifest, tmp_path / "out" / "manifest.json")
    assert service.load(path) == mixed_manifest


def test_load_errors(settings, tmp_path):
    service = ManifestService(settings)
    with pytest.raises(NotFoundError):
        service.load(tmp_path / "missing.json")
    stale = tmp_path / "stale.json"
    stale.write_text(json.dumps({"format_version": 99}))
    with pytest.raises(ManifestError):
        service.load(stale)
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps({"format_version": 1, "file_hashes": {"a.jpg": "nope"}}))
    with pytest.raises(ManifestError):
        service.load(broken)
    with pytest.raises(ManifestError):
        service.build(tmp_path / "no-such-corpus")


def test_component_digest_format():
    with pytest.raises(ValidationError):
        ComponentHash(container="a.zip", member="x.png", sha256="ABC")


def test_media_block_digests(mixed_manifest, mixed_corpus_dir):
    assert set(mixed_manifest.block_hashes) == set(mixed_manifest.file_hashes)
    rel = "mp3/mp3_000.mp3"
    data = (mixed_corpus_dir / rel).read_bytes()
    entry = mixed_manifest.block_hashes[rel]
    assert entry.size == len(data)
    assert entry.sha256[1] == sha256_hex(data[512:1024])


def test_touched_blocks():
    assert touched_blocks([(0, 512)], 512) == [0]
    assert touched_blocks([(511, 2), (4096, 1), (700, 0)], 512) == [0, 1, 8]
    assert touched_blocks([], 512) == []


def test_check_blocks_hashes_only_touched_blocks(mixed_manifest, mixed_corpus_dir):
    rel = "png/png_000.png"
    data = bytearray((mixed_corpus_dir / rel).read_bytes())
    assert check_blocks(mixed_manifest, bytes(data), rel, [(600, 100)]).verified

    data[1500] ^= 0xFF
    decision = check_blocks(mixed_manifest, bytes(data), rel, [(1400, 200)])
    assert decision.status == WhitelistStatus.MISMATCH
    assert decision.identifier == f"{rel}::2"
    assert decision.mismatched_blocks == [2]
    # a change outside the regions is not looked at
    assert check_blocks(mixed_manifest, bytes(data), rel, [(0, 512)]).verified

    assert check_blocks(mixed_manifest, bytes(data[:-1]), rel, [(0, 1)]).status == WhitelistStatus.MISMATCH
    assert check_blocks(mixed_manifest, bytes(data), "elsewhere/photo.png", [(0, 1)]) is None
    assert check_blocks(None, bytes(data), rel, [(0, 1)]) is None
