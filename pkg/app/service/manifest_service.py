import hashlib
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

from fastapi import Depends

from app.core.config.env import Settings, get_settings
from app.domain.schema.fav_schema import ReasonCode
from app.domain.schema.manifest_schema import (
    BlockHashes,
    ComponentHash,
    TrustedManifest,
    WhitelistDecision,
    WhitelistStatus,
    component_key,
)
from app.repository.manifest_repo import ManifestRepository
from app.service.fav.pdf_filters import FilterError, canonical_payload
from app.service.fav.pdf_parser import parse_pdf, stream_classes
from app.service.fav.zip_container import classify_leaf, decode_member, extension, nested_path, parse_container
from app.utils.exceptions.exceptions import FavscanError, ManifestError
from app.utils.helper import normalize_path

logger = logging.getLogger(__name__)

Identifier = Union[str, Tuple[str, Union[str, int]]]
OPAQUE_PDF_STREAMS = {"image", "font", "embedded"}
OOXML_TEXT_PARTS = {"xml", "rels"}


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def check(manifest: Optional[TrustedManifest], subject: bytes, identifier: Identifier) -> WhitelistDecision:
    """
    Compare ``subject`` against the manifest entry for ``identifier``.

    Args:
        identifier: A canonical file path, or a (container path, member) pair for components.

    Returns:
        WhitelistDecision: Verified on digest equality, Mismatch when the entry differs, Unknown when absent.
    """
    digest = sha256_hex(subject)
    if isinstance(identifier, tuple):
        key = component_key(*identifier)
        entry = manifest.component_hashes.get(key) if manifest else None
        expected = entry.sha256 if entry else None
    else:
        key = normalize_path(identifier)
        expected = manifest.file_hashes.get(key) if manifest else None
    if expected is None:
        status = WhitelistStatus.UNKNOWN
    elif expected == digest:
        status = WhitelistStatus.VERIFIED
    else:
        status = WhitelistStatus.MISMATCH
    return WhitelistDecision(status=status, identifier=key, digest=digest, expected=expected)


def touched_blocks(regions: Iterable[Tuple[int, int]], block_size: int) -> List[int]:
    """Indexes of the blocks that (offset, length) regions overlap."""
    touched = set()
    for offset, length in regions:
        if length > 0:
            touched.update(range(offset // block_size, (offset + length - 1) // block_size + 1))
    return sorted(touched)


def check_blocks(manifest: Optional[TrustedManifest], data: bytes, path: str,
                 regions: Iterable[Tuple[int, int]]) -> Optional[WhitelistDecision]:
    """
    Verify only the blocks of a media file that ``regions`` touch.

    Returns:
        Optional[WhitelistDecision]: None when the manifest holds no block digests for ``path``;
        otherwise Verified, or Mismatch naming the first differing block and listing all of them.
    """
    key = normalize_path(path)
    entry = manifest.block_hashes.get(key) if manifest else None
    if entry is None:
        return None
    expected = manifest.file_hashes.get(key)
    if len(data) != entry.size:
        return WhitelistDecision(status=WhitelistStatus.MISMATCH, identifier=key, digest=sha256_hex(data),
                                 expected=expected)
    bs = entry.block_size
    mismatched = [i for i in touched_blocks(regions, bs) if sha256_hex(data[i * bs:(i + 1) * bs]) != entry.sha256[i]]
    if mismatched:
        first = mismatched[0]
        return WhitelistDecision(status=WhitelistStatus.MISMATCH, identifier=component_key(key, first),
                                 digest=sha256_hex(data[first * bs:(first + 1) * bs]), expected=entry.sha256[first],
                                 mismatched_blocks=mismatched)
    return WhitelistDecision(status=WhitelistStatus.VERIFIED, identifier=key, digest=expected or "",
                             expected=expected)


def lookup_digest(manifest: Optional[TrustedManifest], digest: str) -> bool:
    """True when ``digest`` is any trusted record, regardless of identifier."""
    if manifest is None:
        return False
    return digest in manifest.digests()


class ManifestBuilder:
    """Collects whole-file and component digests for one corpus."""

    def __init__(self, media_extensions: Iterable[str], depth: int = 4, byte_budget: int = 256 * 1024 * 1024,
                 block_size: int = 512):
        self.media_extensions = {e.lower().lstrip(".") for e in media_extensions}
        self.depth = depth
        self.byte_budget = byte_budget
        self.block_size = block_size
        self.file_hashes: Dict[str, str] = {}
        self.block_hashes: Dict[str, BlockHashes] = {}
        self.component_hashes: Dict[str, ComponentHash] = {}

    def add_component(self, container: str, member: Union[str, int], payload: bytes, kind: str = "raw") -> None:
        entry = ComponentHash(container=container, member=str(member), sha256=sha256_hex(payload), payload=kind)
        self.component_hashes[component_key(container, member)] = entry

    def add_file(self, path: str, data: bytes) -> None:
        if extension(path) in self.media_extensions:
            self.file_hashes[path] = sha256_hex(data)
            bs = self.block_size
            self.block_hashes[path] = BlockHashes(size=len(data), block_size=bs, sha256=[
                sha256_hex(data[o:o + bs]) for o in range(0, len(data), bs)])
        elif data.startswith(b"PK\x03\x04") or data.startswith(b"PK\x05\x06"):
            self.add_zip(path, data, self.depth)
        elif data.startswith(b"%PDF-"):
            self.add_pdf(path, data)

    def add_zip(self, path: str, data: bytes, depth: int) -> None:
        cmap = parse_container(data)
        if cmap is None:
            return
        ooxml = extension(path) in ("docx", "xlsx", "pptx")
        for member in cmap.members:
            raw = data[member.payload_range[0]:member.payload_range[1]]
            if member.encrypted:
                self.add_component(path, member.name, raw)
                continue
            decoded, failure = decode_member(data, member, self.byte_budget)
            if failure is not None:
                if failure == ReasonCode.ZIP_MEMBER_UNVERIFIED:
                    self.add_component(path, member.name, raw)
                continue
            leaf = classify_leaf(member.name, decoded, self.media_extensions)
            if leaf == "container":
                if depth > 0:
                    self.add_zip(nested_path(path, member.name), decoded, depth - 1)
            elif leaf in ("media", "binary") or (ooxml and extension(member.name) not in OOXML_TEXT_PARTS):
                self.add_component(path, member.name, raw)

    def add_pdf(self, path: str, data: bytes) -> None:
        pdf = parse_pdf(data)
        for number, kind in stream_classes(pdf).items():
            if kind not in OPAQUE_PDF_STREAMS:
                continue
            obj = pdf.object(number)
            try:
                payload, payload_kind = canonical_payload(data, obj, self.byte_budget)
            except FilterError:
                payload, payload_kind = canonical_payload(data, obj, self.byte_budget, payload="raw")
            self.add_component(path, number, payload, payload_kind)

    def build(self, skipped: Iterable[str] = ()) -> TrustedManifest:
        return TrustedManifest(file_hashes=dict(sorted(self.file_hashes.items())),
                               block_hashes=dict(sorted(self.block_hashes.items())),
                               component_hashes=dict(sorted(self.component_hashes.items())),
                               skipped=sorted(skipped))


def build_manifest(corpus_dir, media_extensions: Iterable[str], depth: int = 4,
                   byte_budget: int = 256 * 1024 * 1024, block_size: int = 512) -> TrustedManifest:
    """
    Hash every trusted object under ``corpus_dir``.

    Media files are hashed whole and per block; ZIP/OOXML opaque members and PDF image, font
    and embedded-file streams are hashed as components. Unreadable files are
    skipped with a warning.
    """
    root = Path(corpus_dir)
    builder = ManifestBuilder(media_extensions, depth, byte_budget, block_size)
    skipped = []
    for source in sorted(p for p in root.rglob("*") if p.is_file()):
        rel = normalize_path(source.relative_to(root).as_posix())
        try:
            data = source.read_bytes()
        except OSError as e:
            logger.warning("Skipping unreadable file %s: %s", rel, e)
            skipped.append(rel)
            continue
        builder.add_file(rel, data)
    manifest = builder.build(skipped)
    logger.info("Built trusted manifest: %d files, %d components, %d skipped",
                len(manifest.file_hashes), len(manifest.component_hashes), len(skipped))
    return manifest


class ManifestService:
    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        self.repo = ManifestRepository()

    def build(self, corpus_dir, media_extensions: Optional[Iterable[str]] = None) -> TrustedManifest:
        if not Path(corpus_dir).is_dir():
            raise ManifestError(detail=f"Corpus directory {corpus_dir} does not exist")
        return build_manifest(corpus_dir, media_extensions or self.settings.media_extensions,
                              self.settings.FAV_DEPTH, self.settings.FAV_BYTE_BUDGET, self.settings.BLOCK_SIZE)

    def load(self, path) -> TrustedManifest:
        manifest, err = self.repo.load(path)
        if err:
            if isinstance(err, FavscanError):
                raise err
            raise ManifestError(detail="Failed to read trusted manifest", data=str(err))
        return manifest

    def save(self, manifest: TrustedManifest, path) -> Path:
        saved, err = self.repo.save(manifest, path)
        if err:
            raise ManifestError(detail="Failed to write trusted manifest", data=str(err))
        return saved

    def check(self, manifest: Optional[TrustedManifest], subject: bytes, identifier: Identifier) -> WhitelistDecision:
        return check(manifest, subject, identifier)


def get_manifest_service(settings: Settings = Depends(get_settings)) -> ManifestService:
    return ManifestService(settings)
