import logging
from typing import List, Optional, Tuple

from app.domain.schema.fav_schema import ContainerMap, FavParams, Finding, FormatKind, ReasonCode, Verdict
from app.domain.schema.manifest_schema import TrustedManifest
from app.service.fav.pdf_validator import is_well_formed_xml
from app.service.fav.text_validator import check_utf8_spans
from app.service.fav.zip_container import extension, is_container
from app.service.fav.zip_validator import DecodeBudget, ZipValidator
from app.utils.helper import overlaps

logger = logging.getLogger(__name__)

MEDIA_DIRS = ("word/media/", "xl/media/", "ppt/media/")
XML_PARTS = {"xml", "rels"}
OOXML_KINDS = {"docx": FormatKind.DOCX, "xlsx": FormatKind.XLSX, "pptx": FormatKind.PPTX}


class OoxmlValidator(ZipValidator):
    """
    ZIP validation specialised for Office Open XML packages.

    XML parts must be UTF-8 and well-formed, media and other binary parts are
    whitelisted through the manifest, and every unclaimed byte escalates.
    """

    gap_reason = ReasonCode.OOXML_UNCLAIMED_REGION

    def __init__(self, params: FavParams, manifest: Optional[TrustedManifest] = None,
                 kind: FormatKind = FormatKind.DOCX):
        super().__init__(params, manifest)
        self.kind = kind

    def check_gaps(self, data: bytes, cmap: ContainerMap, spans) -> List[Finding]:
        return [
            Finding(reason=self.gap_reason, span=(start, end), detail=f"unclaimed {end - start}-byte region")
            for start, end in cmap.gaps
            if any(overlaps(start, end, s, e) for s, e in spans)
        ]

    def check_content(self, path: str, name: str, raw: bytes, decoded: bytes, budget: DecodeBudget) -> List[Finding]:
        if is_container(name, decoded):
            return self.descend(path, name, decoded, budget)
        if name.startswith(MEDIA_DIRS):
            return self.check_component(path, name, raw, ReasonCode.MEDIA_HASH_MISMATCH,
                                        ReasonCode.ZIP_MEMBER_UNVERIFIED)
        if extension(name) in XML_PARTS:
            findings = check_utf8_spans(decoded, [(0, len(decoded))])
            if not findings and not is_well_formed_xml(decoded):
                findings.append(Finding(reason=ReasonCode.OOXML_XML_MALFORMED, detail=f"{name}: XML is not well-formed"))
            return findings
        return self.check_component(path, name, raw, ReasonCode.ZIP_MEMBER_UNVERIFIED,
                                    ReasonCode.ZIP_MEMBER_UNVERIFIED)


def validate_ooxml(path: str, data: bytes, regions: List[Tuple[int, int]], params: FavParams,
                   manifest: Optional[TrustedManifest] = None, kind: Optional[FormatKind] = None) -> Verdict:
    kind = kind or OOXML_KINDS.get(extension(path), FormatKind.DOCX)
    verdict = OoxmlValidator(params, manifest, kind).validate(path, data, regions)
    if verdict.suspicious:
        logger.debug("%s: ooxml escalated %s", path, [r.value for r in verdict.reasons])
    return verdict
