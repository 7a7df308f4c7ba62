import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, List, Optional, Tuple

from app.core.config.env import Settings, get_settings
from app.domain.schema.fav_schema import FavParams, Finding, FormatKind, ReasonCode, Verdict
from app.domain.schema.layout_schema import FileRegion, LayoutManifest
from app.domain.schema.manifest_schema import TrustedManifest, WhitelistStatus
from app.domain.schema.snapshot_schema import BlockImage
from app.service.fav.ooxml_validator import OOXML_KINDS, validate_ooxml
from app.service.fav.pdf_validator import validate_pdf
from app.service.fav.text_validator import validate_text
from app.service.fav.zip_container import TEXT_EXTENSIONS, extension
from app.service.fav.zip_validator import validate_zip
from app.service.manifest_service import check, check_blocks, lookup_digest
from app.service.mapping_service import read_file
from app.utils.exceptions.exceptions import LayoutError

logger = logging.getLogger(__name__)


def logical_name(path: str, clone_suffix: str = ".enc") -> str:
    """Name a clone was copied from, so ``report.pdf.enc`` routes like ``report.pdf``."""
    if clone_suffix and path.endswith(clone_suffix) and len(path) > len(clone_suffix):
        return path[:-len(clone_suffix)]
    return path


def is_media_magic(data: bytes) -> bool:
    return (
        data.startswith((b"\xff\xd8\xff", b"\x89PNG\r\n\x1a\n", b"ID3", b"GIF8"))
        or data[4:8] == b"ftyp"
        or (len(data) > 1 and data[0] == 0xFF and data[1] & 0xE0 == 0xE0)
    )


def detect_format(path: str, data: bytes, params: Optional[FavParams] = None) -> FormatKind:
    """
    Format of a file from its magic bytes, with the extension as tie-breaker.

    When the magic bytes are gone the extension alone decides, and a file with
    neither is text only if it decodes as UTF-8 in full.
    """
    params = params or FavParams()
    ext = extension(logical_name(path, params.clone_suffix))
    if data.startswith((b"PK\x03\x04", b"PK\x05\x06")):
        return OOXML_KINDS.get(ext, FormatKind.ZIP)
    if data.startswith(b"%PDF-"):
        return FormatKind.PDF
    if ext in params.media_extensions or is_media_magic(data):
        return FormatKind.MEDIA
    if ext in OOXML_KINDS:
        return OOXML_KINDS[ext]
    if ext == "zip":
        return FormatKind.ZIP
    if ext == "pdf":
        return FormatKind.PDF
    if ext in TEXT_EXTENSIONS:
        return FormatKind.TEXT
    try:
        data.decode("utf-8")
        return FormatKind.TEXT
    except UnicodeDecodeError:
        return FormatKind.UNKNOWN


def validate_media(path: str, data: bytes, manifest: Optional[TrustedManifest],
                   regions: Optional[List[Tuple[int, int]]] = None) -> Verdict:
    """Whitelist check of a media file; with block digests only the blocks under ``regions`` are hashed."""
    decision = None
    if regions is not None:
        decision = check_blocks(manifest, data, path, regions)
    decision = decision or check(manifest, data, path)
    if decision.verified:
        return Verdict.from_findings(path, FormatKind.MEDIA, [])
    if decision.status == WhitelistStatus.MISMATCH:
        detail = "digest differs from manifest"
        if decision.mismatched_blocks:
            detail = f"{len(decision.mismatched_blocks)} blocks differ from manifest"
        return Verdict.from_findings(path, FormatKind.MEDIA, [
            Finding(reason=ReasonCode.MEDIA_HASH_MISMATCH, detail=detail)])
    if lookup_digest(manifest, decision.digest):
        return Verdict.from_findings(path, FormatKind.MEDIA, [])
    return Verdict.from_findings(path, FormatKind.MEDIA, [
        Finding(reason=ReasonCode.MEDIA_UNVERIFIED, detail="not in trusted manifest")])


def dispatch(path: str, data: bytes, regions: List[Tuple[int, int]], manifest: Optional[TrustedManifest] = None,
             params: Optional[FavParams] = None) -> Verdict:
    """
    Route one suspicious file to its format validator.

    Args:
        regions: Suspicious (file_offset, length) ranges.

    Returns:
        Verdict: Benign for empty files or files with no suspicious bytes.
    """
    params = params or FavParams()
    kind = detect_format(path, data, params)
    regions = [(o, min(n, len(data) - o)) for o, n in regions if n > 0 and o < len(data)]
    if not data or not regions:
        return Verdict.from_findings(path, kind, [])
    if kind == FormatKind.TEXT:
        return validate_text(path, data, regions, params)
    if kind == FormatKind.ZIP:
        return validate_zip(path, data, regions, params, manifest)
    if kind.is_ooxml:
        return validate_ooxml(path, data, regions, params, manifest, kind)
    if kind == FormatKind.PDF:
        return validate_pdf(path, data, regions, params, manifest)
    if kind == FormatKind.MEDIA:
        return validate_media(path, data, manifest, regions)
    return Verdict.from_findings(path, kind, [
        Finding(reason=ReasonCode.UNSUPPORTED_FORMAT_ESCALATED, detail="no validator for this format")])


class FavService:
    """Format-aware validation of the files that survived mapping."""

    def __init__(self, settings: Optional[Settings] = None, params: Optional[FavParams] = None):
        self.settings = settings or get_settings()
        self.params = params or self.default_params()

    def default_params(self) -> FavParams:
        s = self.settings
        return FavParams(depth=s.FAV_DEPTH, byte_budget=s.FAV_BYTE_BUDGET, gap_limit=s.GAP_LIMIT, tau=s.SAWA_TAU,
                         window=s.SAWA_WINDOW, nlp_heuristic=s.NLP_HEURISTIC,
                         media_extensions=sorted(s.media_extensions), clone_suffix=s.CLONE_SUFFIX)

    def dispatch(self, path: str, data: bytes, regions: List[Tuple[int, int]],
                 manifest: Optional[TrustedManifest] = None) -> Verdict:
        return dispatch(path, data, regions, manifest, self.params)

    def validate_regions(self, image: BlockImage, layout: LayoutManifest, regions: Iterable[FileRegion],
                         manifest: Optional[TrustedManifest] = None) -> List[Verdict]:
        """
        Validate every suspicious file read back from ``image``.

        Raises:
            LayoutError: If a region names a file missing from the layout.
        """
        jobs: List[Tuple[str, bytes, List[Tuple[int, int]]]] = []
        for region in regions:
            entry = layout.get(region.path)
            if entry is None:
                raise LayoutError(detail=f"File {region.path} is not in the layout manifest")
            jobs.append((region.path, read_file(image, entry), list(region.ranges)))

        def run(job) -> Verdict:
            return dispatch(job[0], job[1], job[2], manifest, self.params)

        if self.settings.WORKERS > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=self.settings.WORKERS) as pool:
                verdicts = list(pool.map(run, jobs))
        else:
            verdicts = [run(job) for job in jobs]
        verdicts.sort(key=lambda v: v.path)
        counts: Dict[str, int] = {}
        for v in verdicts:
            counts[v.decision.value] = counts.get(v.decision.value, 0) + 1
        logger.info("FAV: %d files validated %s", len(verdicts), counts)
        return verdicts
