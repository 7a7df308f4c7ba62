from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

# half-open (start, end) byte span
Span = Tuple[int, int]


class Decision(str, Enum):
    BENIGN = "Benign"
    SUSPICIOUS = "Suspicious"


class FormatKind(str, Enum):
    TEXT = "Text"
    ZIP = "Zip"
    DOCX = "Docx"
    XLSX = "Xlsx"
    PPTX = "Pptx"
    PDF = "Pdf"
    MEDIA = "Media"
    UNKNOWN = "Unknown"

    @property
    def is_ooxml(self) -> bool:
        return self in (FormatKind.DOCX, FormatKind.XLSX, FormatKind.PPTX)


class ReasonCode(str, Enum):
    UTF8_DECODE_FAIL = "UTF8_DECODE_FAIL"
    TEXT_INCOHERENT = "TEXT_INCOHERENT"
    ZIP_STRUCT_VIOLATION = "ZIP_STRUCT_VIOLATION"
    ZIP_GAP_ESCALATED = "ZIP_GAP_ESCALATED"
    ZIP_INFLATE_FAIL = "ZIP_INFLATE_FAIL"
    ZIP_CRC_MISMATCH = "ZIP_CRC_MISMATCH"
    ZIP_BUDGET_EXHAUSTED = "ZIP_BUDGET_EXHAUSTED"
    ZIP_MEMBER_UNVERIFIED = "ZIP_MEMBER_UNVERIFIED"
    OOXML_XML_MALFORMED = "OOXML_XML_MALFORMED"
    OOXML_UNCLAIMED_REGION = "OOXML_UNCLAIMED_REGION"
    PDF_FILTER_DECODE_FAIL = "PDF_FILTER_DECODE_FAIL"
    PDF_STRUCT_VIOLATION = "PDF_STRUCT_VIOLATION"
    PDF_STREAM_MALFORMED = "PDF_STREAM_MALFORMED"
    PDF_GAP_ESCALATED = "PDF_GAP_ESCALATED"
    PDF_COMPONENT_UNVERIFIED = "PDF_COMPONENT_UNVERIFIED"
    MEDIA_HASH_MISMATCH = "MEDIA_HASH_MISMATCH"
    MEDIA_UNVERIFIED = "MEDIA_UNVERIFIED"
    UNSUPPORTED_FORMAT_ESCALATED = "UNSUPPORTED_FORMAT_ESCALATED"


class Finding(BaseModel):
    reason: ReasonCode
    detail: str = ""
    span: Optional[Span] = None


class Verdict(BaseModel):
    path: str
    format: FormatKind = FormatKind.UNKNOWN
    decision: Decision = Decision.BENIGN
    reasons: List[ReasonCode] = Field(default_factory=list)
    findings: List[Finding] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_reasons(self):
        if self.decision == Decision.SUSPICIOUS and not self.reasons:
            raise ValueError("a suspicious verdict needs at least one reason")
        return self

    @classmethod
    def from_findings(cls, path: str, kind: FormatKind, findings: List[Finding]) -> "Verdict":
        reasons: List[ReasonCode] = []
        for f in findings:
            if f.reason not in reasons:
                reasons.append(f.reason)
        return cls(path=path, format=kind, findings=findings, reasons=reasons,
                   decision=Decision.SUSPICIOUS if findings else Decision.BENIGN)

    @property
    def suspicious(self) -> bool:
        return self.decision == Decision.SUSPICIOUS


class FavParams(BaseModel):
    depth: int = Field(4, ge=0, description="Nested container depth budget")
    byte_budget: int = Field(256 * 1024 * 1024, ge=0, description="Decoded byte budget per file")
    gap_limit: int = Field(64, ge=0, description="Largest tolerated unclaimed gap")
    tau: float = Field(350.0, gt=0, description="Chi-squared threshold for uniform-like bytes")
    window: int = Field(16, ge=1, description="Shortest span scored for uniformity")
    nlp_heuristic: bool = False
    media_extensions: List[str] = Field(default_factory=lambda: ["jpg", "jpeg", "png", "mp3", "mp4"])
    clone_suffix: str = ".enc"


class ZipMember(BaseModel):
    name: str
    cd_offset: int
    lfh_range: Span
    payload_range: Span
    descriptor_range: Optional[Span] = None
    method: int
    flags: int
    crc32: int
    compressed_size: int
    uncompressed_size: int

    @property
    def encrypted(self) -> bool:
        return bool(self.flags & 0x1)

    @property
    def method_name(self) -> str:
        return {0: "STORE", 8: "DEFLATE"}.get(self.method, f"METHOD_{self.method}")


class ContainerMap(BaseModel):
    size: int
    eocd: Optional[Span] = None
    central_directory: Optional[Span] = None
    comment: Optional[Span] = None
    members: List[ZipMember] = Field(default_factory=list)
    gaps: List[Span] = Field(default_factory=list)
    violations: List[Finding] = Field(default_factory=list)

    @property
    def metadata(self) -> List[Span]:
        spans = [m.lfh_range for m in self.members]
        spans += [m.descriptor_range for m in self.members if m.descriptor_range]
        if self.central_directory:
            spans.append(self.central_directory)
        if self.eocd:
            spans.append(self.eocd)
        return sorted(spans)


class PdfObject(BaseModel):
    number: int
    generation: int
    obj_range: Span
    dict_range: Optional[Span] = None
    stream_range: Optional[Span] = None
    filters: List[str] = Field(default_factory=list)
    decode_parms: List[Dict[str, Any]] = Field(default_factory=list)
    entries: Dict[str, Any] = Field(default_factory=dict)


class PdfMap(BaseModel):
    size: int
    version: Optional[str] = None
    header: Optional[Span] = None
    objects: List[PdfObject] = Field(default_factory=list)
    xref: Optional[Span] = None
    trailer: Optional[Span] = None
    startxref: Optional[Span] = None
    gaps: List[Span] = Field(default_factory=list)
    violations: List[Finding] = Field(default_factory=list)

    def object(self, number: int) -> Optional[PdfObject]:
        return next((o for o in self.objects if o.number == number), None)
