import logging
from typing import List, Optional, Tuple

from lxml import etree

from app.domain.schema.fav_schema import FavParams, Finding, FormatKind, PdfMap, PdfObject, ReasonCode, Verdict
from app.domain.schema.manifest_schema import TrustedManifest, WhitelistStatus
from app.service.fav.pdf_filters import FilterError, canonical_payload, decode_stream, is_supported
from app.service.fav.pdf_parser import lex_content, lex_objects, parse_pdf, stream_classes
from app.service.fav.zip_validator import DecodeBudget, gap_guard
from app.service.manifest_service import check, lookup_digest
from app.utils.helper import overlaps
from app.utils.stats.chi2 import chi_squared

logger = logging.getLogger(__name__)

OPAQUE_STREAMS = {"image", "font", "embedded"}
# shortest decoded span scored for uniformity
MIN_SCORED = 64


def xml_parser() -> etree.XMLParser:
    return etree.XMLParser(resolve_entities=False, no_network=True, huge_tree=True)


def is_well_formed_xml(data: bytes) -> bool:
    try:
        data.decode("utf-8")
        etree.fromstring(data, parser=xml_parser())
        return True
    except (UnicodeDecodeError, etree.XMLSyntaxError, ValueError):
        return False


def check_xref_stream(obj: PdfObject, decoded: bytes) -> Optional[str]:
    widths = obj.entries.get("W")
    if not isinstance(widths, list) or len(widths) != 3 or not all(isinstance(w, int) and w >= 0 for w in widths):
        return "xref stream has no valid /W"
    index = obj.entries.get("Index", [0, obj.entries.get("Size", 0)])
    if not isinstance(index, list) or len(index) % 2 or not all(isinstance(i, int) for i in index):
        return "xref stream has no valid /Index"
    count = sum(index[1::2])
    if len(decoded) != count * sum(widths):
        return f"xref stream holds {len(decoded)} bytes, expected {count * sum(widths)}"
    return None


class PdfValidator:
    """Decode-then-decide validation of PDF streams and the structure around them."""

    def __init__(self, params: FavParams, manifest: Optional[TrustedManifest] = None):
        self.params = params
        self.manifest = manifest

    def validate(self, path: str, data: bytes, regions: List[Tuple[int, int]]) -> Verdict:
        spans = [(o, o + n) for o, n in regions if n > 0]
        if not spans:
            return Verdict.from_findings(path, FormatKind.PDF, [])
        pdf = parse_pdf(data)
        findings = list(pdf.violations)
        if pdf.header is None:
            return Verdict.from_findings(path, FormatKind.PDF, findings)

        budget = DecodeBudget(self.params.depth, self.params.byte_budget)
        classes = stream_classes(pdf)
        for obj in pdf.objects:
            if obj.stream_range is None or not any(overlaps(*obj.stream_range, s, e) for s, e in spans):
                continue
            findings.extend(self.check_stream(path, data, obj, classes.get(obj.number, "other"), budget))
        findings.extend(self.check_gaps(data, pdf, spans))
        return Verdict.from_findings(path, FormatKind.PDF, findings)

    def check_gaps(self, data: bytes, pdf: PdfMap, spans) -> List[Finding]:
        out = []
        for start, end in pdf.gaps:
            if any(overlaps(start, end, s, e) for s, e in spans):
                if not gap_guard(data[start:end], self.params.gap_limit, self.params.tau):
                    out.append(Finding(reason=ReasonCode.PDF_GAP_ESCALATED, span=(start, end),
                                       detail=f"unclaimed {end - start}-byte region between objects"))
        return out

    def check_component(self, path: str, data: bytes, obj: PdfObject, budget: DecodeBudget) -> List[Finding]:
        entry = self.manifest.component(path, obj.number) if self.manifest else None
        try:
            payload, _ = canonical_payload(data, obj, max(budget.bytes_left, 0), entry.payload if entry else None)
        except FilterError as e:
            return [Finding(reason=ReasonCode.PDF_FILTER_DECODE_FAIL, detail=f"object {obj.number}: {e}",
                            span=obj.stream_range)]
        decision = check(self.manifest, payload, (path, obj.number))
        if decision.verified:
            return []
        if decision.status == WhitelistStatus.UNKNOWN and lookup_digest(self.manifest, decision.digest):
            return []
        detail = "digest differs from manifest" if decision.status == WhitelistStatus.MISMATCH \
            else "not in trusted manifest"
        return [Finding(reason=ReasonCode.PDF_COMPONENT_UNVERIFIED, detail=f"object {obj.number}: {detail}",
                        span=obj.stream_range)]

    def check_stream(self, path: str, data: bytes, obj: PdfObject, kind: str, budget: DecodeBudget) -> List[Finding]:
        """Decode a touched stream and apply the check for its class."""
        if kind in OPAQUE_STREAMS or not is_supported(obj.filters):
            return self.check_component(path, data, obj, budget)
        start, end = obj.stream_range
        try:
            decoded = decode_stream(data[start:end], obj.filters, obj.decode_parms, max(budget.bytes_left, 0))
        except FilterError as e:
            return [Finding(reason=ReasonCode.PDF_FILTER_DECODE_FAIL, detail=f"object {obj.number}: {e}",
                            span=obj.stream_range)]
        if not budget.consume(len(decoded)):
            return [Finding(reason=ReasonCode.ZIP_BUDGET_EXHAUSTED, detail="decoded byte budget spent")]

        if kind == "xmp":
            error = None if is_well_formed_xml(decoded) else "metadata stream is not well-formed XML"
        elif kind == "objstm":
            error = lex_objects(decoded)
        elif kind == "xref":
            error = check_xref_stream(obj, decoded)
        elif kind == "content":
            error = lex_content(decoded)
        else:
            error = None
        if error is None and kind in ("content", "other") and len(decoded) >= MIN_SCORED \
                and chi_squared(decoded) <= self.params.tau:
            error = "decoded stream is uniform-like"
        if error:
            return [Finding(reason=ReasonCode.PDF_STREAM_MALFORMED, detail=f"object {obj.number}: {error}",
                            span=obj.stream_range)]
        return []


def validate_pdf(path: str, data: bytes, regions: List[Tuple[int, int]], params: FavParams,
                 manifest: Optional[TrustedManifest] = None) -> Verdict:
    verdict = PdfValidator(params, manifest).validate(path, data, regions)
    if verdict.suspicious:
        logger.debug("%s: pdf escalated %s", path, [r.value for r in verdict.reasons])
    return verdict
