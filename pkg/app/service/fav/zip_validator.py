import logging
from typing import List, Optional, Tuple

from app.domain.schema.fav_schema import ContainerMap, FavParams, Finding, FormatKind, ReasonCode, Verdict, ZipMember
from app.domain.schema.manifest_schema import TrustedManifest, WhitelistStatus
from app.service.fav.text_validator import check_utf8_spans
from app.service.fav.zip_container import classify_leaf, decode_member, nested_path, parse_container
from app.service.manifest_service import check, lookup_digest
from app.utils.helper import overlaps
from app.utils.stats.chi2 import chi_squared

logger = logging.getLogger(__name__)


def gap_guard(gap: bytes, gap_limit: int = 64, tau: float = 350.0) -> bool:
    """True when the gap is tolerated: small and clearly non-uniform."""
    if not gap:
        return True
    return len(gap) <= gap_limit and chi_squared(gap) > tau


class DecodeBudget:
    """Depth and decoded-byte allowance shared across one file's nested containers."""

    def __init__(self, depth: int, byte_budget: int):
        self.depth = depth
        self.bytes_left = byte_budget

    def consume(self, n: int) -> bool:
        self.bytes_left -= n
        return self.bytes_left >= 0


class ZipValidator:
    """Member-first, decode-then-decide validation of ZIP containers."""

    kind = FormatKind.ZIP
    gap_reason = ReasonCode.ZIP_GAP_ESCALATED

    def __init__(self, params: FavParams, manifest: Optional[TrustedManifest] = None):
        self.params = params
        self.manifest = manifest

    def validate(self, path: str, data: bytes, regions: List[Tuple[int, int]],
                 budget: Optional[DecodeBudget] = None) -> Verdict:
        budget = budget or DecodeBudget(self.params.depth, self.params.byte_budget)
        findings = self.findings(path, data, regions, budget)
        return Verdict.from_findings(path, self.kind, findings)

    def findings(self, path: str, data: bytes, regions: List[Tuple[int, int]], budget: DecodeBudget) -> List[Finding]:
        spans = [(o, o + n) for o, n in regions if n > 0]
        if not spans:
            return []
        cmap = parse_container(data)
        if cmap is None:
            return [Finding(reason=ReasonCode.ZIP_STRUCT_VIOLATION, detail="no end-of-central-directory record")]

        findings: List[Finding] = list(cmap.violations)
        for member in cmap.members:
            touched = [member.lfh_range, member.payload_range]
            if member.descriptor_range:
                touched.append(member.descriptor_range)
            if any(overlaps(a, b, s, e) for a, b in touched for s, e in spans):
                findings.extend(self.check_member(path, data, member, budget))
        findings.extend(self.check_gaps(data, cmap, spans))
        if cmap.comment and any(overlaps(*cmap.comment, s, e) for s, e in spans):
            start, end = cmap.comment
            findings.extend(check_utf8_spans(data, [(start, end - start)]))
        return findings

    def check_gaps(self, data: bytes, cmap: ContainerMap, spans) -> List[Finding]:
        out = []
        for start, end in cmap.gaps:
            if any(overlaps(start, end, s, e) for s, e in spans):
                if not gap_guard(data[start:end], self.params.gap_limit, self.params.tau):
                    out.append(Finding(reason=self.gap_reason, span=(start, end),
                                       detail=f"unclaimed {end - start}-byte region"))
        return out

    def check_component(self, path: str, name: str, raw: bytes, mismatch: ReasonCode,
                        unverified: ReasonCode) -> List[Finding]:
        identifier = (path, name)
        decision = check(self.manifest, raw, identifier)
        if decision.verified:
            return []
        if decision.status == WhitelistStatus.MISMATCH:
            return [Finding(reason=mismatch, detail=f"{name}: digest differs from manifest")]
        if lookup_digest(self.manifest, decision.digest):
            return []
        return [Finding(reason=unverified, detail=f"{name}: not in trusted manifest")]

    def check_member(self, path: str, data: bytes, member: ZipMember, budget: DecodeBudget) -> List[Finding]:
        raw = data[member.payload_range[0]:member.payload_range[1]]
        if member.encrypted:
            return self.check_component(path, member.name, raw, ReasonCode.ZIP_MEMBER_UNVERIFIED,
                                        ReasonCode.ZIP_MEMBER_UNVERIFIED)
        if budget.bytes_left < 0:
            return [Finding(reason=ReasonCode.ZIP_BUDGET_EXHAUSTED, detail="decoded byte budget spent")]
        decoded, failure = decode_member(data, member, max(budget.bytes_left, 0))
        if failure is not None:
            if failure == ReasonCode.ZIP_MEMBER_UNVERIFIED:
                return self.check_component(path, member.name, raw, ReasonCode.ZIP_MEMBER_UNVERIFIED,
                                            ReasonCode.ZIP_MEMBER_UNVERIFIED)
            return [Finding(reason=failure, detail=f"{member.name}: {member.method_name} member failed to decode",
                            span=member.payload_range)]
        if not budget.consume(len(decoded)):
            return [Finding(reason=ReasonCode.ZIP_BUDGET_EXHAUSTED, detail="decoded byte budget spent")]
        return self.check_content(path, member.name, raw, decoded, budget)

    def check_content(self, path: str, name: str, raw: bytes, decoded: bytes, budget: DecodeBudget) -> List[Finding]:
        """Classify a decoded leaf and apply the matching check."""
        leaf = classify_leaf(name, decoded, self.params.media_extensions)
        if leaf == "container":
            return self.descend(path, name, decoded, budget)
        if leaf == "media":
            return self.check_component(path, name, raw, ReasonCode.MEDIA_HASH_MISMATCH,
                                        ReasonCode.ZIP_MEMBER_UNVERIFIED)
        if leaf == "text":
            return check_utf8_spans(decoded, [(0, len(decoded))], self.params.nlp_heuristic)
        return self.check_component(path, name, raw, ReasonCode.ZIP_MEMBER_UNVERIFIED,
                                    ReasonCode.ZIP_MEMBER_UNVERIFIED)

    def descend(self, path: str, name: str, decoded: bytes, budget: DecodeBudget) -> List[Finding]:
        if budget.depth <= 0:
            return [Finding(reason=ReasonCode.ZIP_BUDGET_EXHAUSTED, detail=f"{name}: nesting depth exhausted")]
        budget.depth -= 1
        try:
            inner = ZipValidator(self.params, self.manifest)
            nested = inner.findings(nested_path(path, name), decoded, [(0, len(decoded))], budget)
        finally:
            budget.depth += 1
        # nested spans are in the inner container's coordinates
        for finding in nested:
            finding.detail = f"{name}/{finding.detail}"
            finding.span = None
        return nested


def validate_zip(path: str, data: bytes, regions: List[Tuple[int, int]], params: FavParams,
                 manifest: Optional[TrustedManifest] = None) -> Verdict:
    verdict = ZipValidator(params, manifest).validate(path, data, regions)
    if verdict.suspicious:
        logger.debug("%s: zip escalated %s", path, [r.value for r in verdict.reasons])
    return verdict
