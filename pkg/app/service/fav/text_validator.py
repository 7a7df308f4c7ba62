import logging
import re
from typing import Iterable, List, Tuple

from app.domain.schema.fav_schema import FavParams, Finding, FormatKind, ReasonCode, Verdict

logger = logging.getLogger(__name__)

MAX_CONTINUATION = 3
WORD = re.compile(r"\S+")


def _is_continuation(byte: int) -> bool:
    return byte & 0xC0 == 0x80


def extend_to_codepoints(data: bytes, start: int, end: int) -> Tuple[int, int]:
    """Widen [start, end) outward by at most three bytes per side to code-point boundaries."""
    steps = 0
    while start > 0 and steps < MAX_CONTINUATION and start < len(data) and _is_continuation(data[start]):
        start -= 1
        steps += 1
    steps = 0
    while end < len(data) and steps < MAX_CONTINUATION and _is_continuation(data[end]):
        end += 1
        steps += 1
    return start, end


def is_coherent(text: str) -> bool:
    """Printable ratio at least 0.95 and mean word length within [2, 20]."""
    if not text:
        return True
    printable = sum(1 for ch in text if ch.isprintable() or ch in "\r\n\t")
    if printable / len(text) < 0.95:
        return False
    words = WORD.findall(text)
    if not words:
        return True
    mean = sum(len(w) for w in words) / len(words)
    return 2 <= mean <= 20


def check_utf8_spans(data: bytes, spans: Iterable[Tuple[int, int]], nlp_heuristic: bool = False) -> List[Finding]:
    """Strict UTF-8 decoding of each (offset, length) span widened to code-point boundaries."""
    findings: List[Finding] = []
    for offset, length in spans:
        start, end = extend_to_codepoints(data, offset, min(offset + length, len(data)))
        try:
            text = data[start:end].decode("utf-8", errors="strict")
        except UnicodeDecodeError as e:
            findings.append(Finding(reason=ReasonCode.UTF8_DECODE_FAIL, span=(start, end),
                                    detail=f"{e.reason} at byte {start + e.start}"))
            continue
        if nlp_heuristic and not is_coherent(text):
            findings.append(Finding(reason=ReasonCode.TEXT_INCOHERENT, span=(start, end),
                                    detail="printable ratio or word length out of range"))
    return findings


def validate_text(path: str, data: bytes, regions: List[Tuple[int, int]], params: FavParams) -> Verdict:
    findings = check_utf8_spans(data, regions, params.nlp_heuristic)
    if findings:
        logger.debug("%s: %d text spans failed validation", path, len(findings))
    return Verdict.from_findings(path, FormatKind.TEXT, findings)
