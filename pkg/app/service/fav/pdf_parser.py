"""
Lightweight PDF structure recovery: a strict tokenizer, an object-value parser and a
sequential top-level scan that maps header, indirect objects, stream payloads,
xref table, trailer and startxref to byte ranges.
"""
import re
from typing import Any, Dict, List, NamedTuple, Optional, Set, Tuple

from app.domain.schema.fav_schema import Finding, PdfMap, PdfObject, ReasonCode, Span
from app.service.fav.pdf_filters import normalize_filters
from app.service.fav.zip_container import complement
from app.utils.helper import coalesce_spans

WHITESPACE = b"\x00\t\n\x0c\r "
DELIMITERS = b"()<>[]{}/%"
HEX_DIGITS = b"0123456789abcdefABCDEF"
NUMBER = re.compile(rb"[+-]?(?:\d+\.?\d*|\.\d+)$")
KEYWORD_CHARS = re.compile(rb"[A-Za-z0-9*'\"]+$")
HEADER = re.compile(rb"%PDF-(\d\.\d)(?:\r\n|\r|\n)")
XREF_SUBSECTION = re.compile(rb"(\d+) (\d+)[ ]?(?:\r\n|\r|\n)")
XREF_ENTRY = re.compile(rb"(\d{10}) (\d{5}) ([nf])(?:\r\n| \n| \r)")
EOL = re.compile(rb"\r\n|\r|\n")

OBJECT_KEYWORDS = {b"true", b"false", b"null", b"R", b"obj", b"endobj", b"stream", b"endstream",
                   b"xref", b"trailer", b"startxref"}
CONTENT_OPERATORS = {
    b"b", b"B", b"b*", b"B*", b"BDC", b"BI", b"BMC", b"BT", b"BX", b"c", b"cm", b"CS", b"cs", b"d", b"d0",
    b"d1", b"Do", b"DP", b"EI", b"EMC", b"ET", b"EX", b"f", b"F", b"f*", b"G", b"g", b"gs", b"h", b"i",
    b"ID", b"j", b"J", b"K", b"k", b"l", b"m", b"M", b"MP", b"n", b"q", b"Q", b"re", b"RG", b"rg", b"ri",
    b"s", b"S", b"SC", b"sc", b"SCN", b"scn", b"sh", b"T*", b"Tc", b"Td", b"TD", b"Tf", b"Tj", b"TJ", b"TL",
    b"Tm", b"Tr", b"Ts", b"Tw", b"Tz", b"v", b"w", b"W", b"W*", b"y", b"'", b"\"", b"true", b"false", b"null",
}


class PdfSyntaxError(Exception):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at byte {pos}")
        self.pos = pos


class Name(str):
    pass


class Ref(NamedTuple):
    number: int
    generation: int


class Keyword(bytes):
    pass


class Token(NamedTuple):
    kind: str
    value: Any
    start: int
    end: int


def is_text_string(raw: bytes) -> bool:
    """Literal strings must hold text: UTF-16BE with a BOM, or UTF-8 without control bytes."""
    try:
        if raw.startswith(b"\xfe\xff"):
            text = raw[2:].decode("utf-16-be")
        else:
            text = raw.decode("utf-8")
    except UnicodeDecodeError:
        return False
    return all(ch.isprintable() or ch in "\r\n\t" for ch in text)


class Lexer:
    """Strict PDF tokenizer over data[pos:end]."""

    def __init__(self, data: bytes, pos: int = 0, end: Optional[int] = None, keywords=OBJECT_KEYWORDS,
                 text_strings: bool = True):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end
        self.keywords = keywords
        self.text_strings = text_strings

    def skip_space(self, comments: bool = True) -> None:
        data, end = self.data, self.end
        while self.pos < end:
            ch = data[self.pos]
            if ch in WHITESPACE:
                self.pos += 1
            elif comments and ch == 0x25:
                m = EOL.search(data, self.pos, end)
                self.pos = m.end() if m else end
            else:
                return

    def at_end(self) -> bool:
        self.skip_space()
        return self.pos >= self.end

    def peek(self) -> Optional[Token]:
        saved = self.pos
        try:
            return self.next()
        finally:
            self.pos = saved

    def next(self) -> Optional[Token]:
        self.skip_space()
        data, start = self.data, self.pos
        if start >= self.end:
            return None
        ch = data[start:start + 1]
        if ch == b"/":
            return self._name(start)
        if ch == b"(":
            return self._literal(start)
        if ch == b"<":
            if data[start + 1:start + 2] == b"<":
                self.pos = start + 2
                return Token("dict_open", None, start, self.pos)
            return self._hex(start)
        if ch == b">":
            if data[start + 1:start + 2] == b">":
                self.pos = start + 2
                return Token("dict_close", None, start, self.pos)
            raise PdfSyntaxError("stray '>'", start)
        if ch in (b"[", b"]"):
            self.pos = start + 1
            return Token("array_open" if ch == b"[" else "array_close", None, start, self.pos)
        if ch in (b")", b"{", b"}"):
            raise PdfSyntaxError(f"unexpected delimiter {ch!r}", start)
        return self._regular(start)

    def _regular(self, start: int) -> Token:
        end = start
        data = self.data
        while end < self.end and data[end] not in WHITESPACE and data[end] not in DELIMITERS:
            end += 1
        word = data[start:end]
        self.pos = end
        if NUMBER.match(word):
            value = float(word) if b"." in word else int(word)
            return Token("number", value, start, end)
        if KEYWORD_CHARS.match(word) and word in self.keywords:
            return Token("keyword", Keyword(word), start, end)
        raise PdfSyntaxError(f"unknown keyword {word[:16]!r}", start)

    def _name(self, start: int) -> Token:
        end = start + 1
        data = self.data
        out = bytearray()
        while end < self.end and data[end] not in WHITESPACE and data[end] not in DELIMITERS:
            ch = data[end]
            if ch == 0x23:
                pair = data[end + 1:end + 3]
                if len(pair) != 2 or any(c not in HEX_DIGITS for c in pair):
                    raise PdfSyntaxError("bad name escape", end)
                out.append(int(pair, 16))
                end += 3
                continue
            if not 0x21 <= ch <= 0x7E:
                raise PdfSyntaxError("non-printable byte in name", end)
            out.append(ch)
            end += 1
        self.pos = end
        return Token("name", Name(out.decode("latin-1")), start, end)

    def _literal(self, start: int) -> Token:
        data = self.data
        depth, i = 1, start + 1
        out = bytearray()
        while i < self.end:
            ch = data[i]
            if ch == 0x5C:
                nxt = data[i + 1:i + 2]
                if not nxt:
                    break
                escapes = {b"n": b"\n", b"r": b"\r", b"t": b"\t", b"b": b"\b", b"f": b"\f",
                           b"(": b"(", b")": b")", b"\\": b"\\"}
                if nxt in escapes:
                    out += escapes[nxt]
                    i += 2
                elif nxt.isdigit():
                    digits = re.match(rb"[0-7]{1,3}", data[i + 1:i + 4])
                    if not digits:
                        raise PdfSyntaxError("bad octal escape", i)
                    out.append(int(digits.group(), 8) & 0xFF)
                    i += 1 + len(digits.group())
                elif nxt in (b"\r", b"\n"):
                    i += 3 if data[i + 1:i + 3] == b"\r\n" else 2
                else:
                    i += 2
                continue
            if ch == 0x28:
                depth += 1
            elif ch == 0x29:
                depth -= 1
                if depth == 0:
                    self.pos = i + 1
                    value = bytes(out)
                    if self.text_strings and not is_text_string(value):
                        raise PdfSyntaxError("literal string is not text", start)
                    return Token("string", value, start, self.pos)
            out.append(ch)
            i += 1
        raise PdfSyntaxError("unterminated literal string", start)

    def _hex(self, start: int) -> Token:
        end = self.data.find(b">", start + 1, self.end)
        if end < 0:
            raise PdfSyntaxError("unterminated hex string", start)
        body = bytes(c for c in self.data[start + 1:end] if c not in WHITESPACE)
        if any(c not in HEX_DIGITS for c in body):
            raise PdfSyntaxError("non-hex byte in hex string", start)
        self.pos = end + 1
        if len(body) % 2:
            body += b"0"
        return Token("hexstring", bytes.fromhex(body.decode("ascii")), start, self.pos)


def parse_value(lexer: Lexer, token: Optional[Token] = None) -> Any:
    """Parse one object value, folding ``n g R`` into a Ref."""
    token = token or lexer.next()
    if token is None:
        raise PdfSyntaxError("unexpected end of data", lexer.pos)
    kind = token.kind
    if kind == "number":
        if isinstance(token.value, int) and token.value >= 0:
            saved = lexer.pos
            second = lexer.next() if not lexer.at_end() else None
            if second is not None and second.kind == "number" and isinstance(second.value, int):
                third = lexer.next() if not lexer.at_end() else None
                if third is not None and third.kind == "keyword" and third.value == b"R":
                    return Ref(token.value, second.value)
            lexer.pos = saved
        return token.value
    if kind in ("name", "string", "hexstring"):
        return token.value
    if kind == "array_open":
        items = []
        while True:
            nxt = lexer.next()
            if nxt is None:
                raise PdfSyntaxError("unterminated array", token.start)
            if nxt.kind == "array_close":
                return items
            items.append(parse_value(lexer, nxt))
    if kind == "dict_open":
        entries: Dict[str, Any] = {}
        while True:
            key = lexer.next()
            if key is None:
                raise PdfSyntaxError("unterminated dictionary", token.start)
            if key.kind == "dict_close":
                return entries
            if key.kind != "name":
                raise PdfSyntaxError("dictionary key is not a name", key.start)
            entries[key.value] = parse_value(lexer)
    if kind == "keyword" and token.value in (b"true", b"false", b"null"):
        return {b"true": True, b"false": False, b"null": None}[token.value]
    raise PdfSyntaxError(f"unexpected {kind}", token.start)


def _violation(detail: str, span: Optional[Span] = None, reason=ReasonCode.PDF_STRUCT_VIOLATION) -> Finding:
    return Finding(reason=reason, detail=detail, span=span)


def _skip_eol(data: bytes, pos: int) -> int:
    m = EOL.match(data, pos)
    return m.end() if m else pos


def _parse_object(data: bytes, lexer: Lexer, start: int, pdf: PdfMap, pending_lengths: list) -> None:
    num = lexer.next()
    gen = lexer.next()
    kw = lexer.next()
    if not (num and gen and kw and num.kind == "number" and gen.kind == "number"
            and kw.kind == "keyword" and kw.value == b"obj"):
        raise PdfSyntaxError("malformed object header", start)
    value_start = lexer.pos
    value = parse_value(lexer)
    dict_range = (value_start, lexer.pos)
    obj = PdfObject(number=int(num.value), generation=int(gen.value), obj_range=(start, lexer.pos),
                    dict_range=dict_range)
    if isinstance(value, dict):
        obj.entries = value

    tail = lexer.next()
    if tail is None or tail.kind != "keyword":
        raise PdfSyntaxError("object not closed by endobj", lexer.pos)
    if tail.value == b"stream":
        if not isinstance(value, dict):
            raise PdfSyntaxError("stream without dictionary", tail.start)
        payload_start = _skip_eol(data, tail.end)
        if payload_start == tail.end or data[tail.end:payload_start] == b"\r":
            raise PdfSyntaxError("stream keyword not followed by EOL", tail.end)
        length = value.get("Length")
        if isinstance(length, int) and length >= 0:
            payload_end = payload_start + length
            after = _skip_eol(data, payload_end)
            if data[after:after + 9] != b"endstream":
                pdf.violations.append(_violation(f"object {obj.number}: /Length disagrees with endstream",
                                                 (payload_start, payload_end), ReasonCode.PDF_STREAM_MALFORMED))
                payload_end = _find_endstream(data, payload_start)
        else:
            payload_end = _find_endstream(data, payload_start)
            if isinstance(length, Ref):
                pending_lengths.append((obj, length))
            else:
                pdf.violations.append(_violation(f"object {obj.number}: missing /Length",
                                                 (payload_start, payload_end), ReasonCode.PDF_STREAM_MALFORMED))
        obj.stream_range = (payload_start, payload_end)
        obj.filters = normalize_filters(value.get("Filter"))
        parms = value.get("DecodeParms")
        obj.decode_parms = parms if isinstance(parms, list) else [parms or {}]
        lexer.pos = _skip_eol(data, payload_end)
        endstream = lexer.next()
        if endstream is None or endstream.kind != "keyword" or endstream.value != b"endstream":
            raise PdfSyntaxError("missing endstream", payload_end)
        tail = lexer.next()
        if tail is None or tail.kind != "keyword":
            raise PdfSyntaxError("stream object not closed", lexer.pos)
    if tail.value != b"endobj":
        raise PdfSyntaxError("object not closed by endobj", tail.start)
    obj.obj_range = (start, _skip_eol(data, tail.end))
    lexer.pos = obj.obj_range[1]
    pdf.objects.append(obj)


def _find_endstream(data: bytes, start: int) -> int:
    at = data.find(b"endstream", start)
    if at < 0:
        raise PdfSyntaxError("missing endstream", start)
    # the EOL before endstream is not part of the payload
    if data[at - 2:at] == b"\r\n":
        return max(start, at - 2)
    if data[at - 1:at] in (b"\n", b"\r"):
        return max(start, at - 1)
    return at


def _parse_xref(data: bytes, lexer: Lexer, start: int, pdf: PdfMap, entries: Dict[int, int]) -> None:
    pos = _skip_eol(data, start + 4)
    if pos == start + 4:
        raise PdfSyntaxError("xref keyword not followed by EOL", pos)
    while True:
        m = XREF_SUBSECTION.match(data, pos)
        if not m:
            break
        first, count = int(m.group(1)), int(m.group(2))
        pos = m.end()
        for i in range(count):
            e = XREF_ENTRY.match(data, pos)
            if not e:
                raise PdfSyntaxError("malformed xref entry", pos)
            if e.group(3) == b"n":
                entries[first + i] = int(e.group(1))
            pos = e.end()
    pdf.xref = (start, pos)
    lexer.pos = pos


def parse_pdf(data: bytes) -> PdfMap:
    """
    Map a PDF's top-level structure to byte ranges.

    Parsing stops at the first syntax error, which is recorded as a violation.
    """
    pdf = PdfMap(size=len(data))
    header = HEADER.match(data)
    if not header:
        pdf.violations.append(_violation("missing %PDF-1.x header", (0, min(len(data), 8))))
        return pdf
    pdf.version = header.group(1).decode("ascii")
    header_end = header.end()
    # a binary marker comment directly after the header belongs to it
    if data[header_end:header_end + 1] == b"%":
        m = EOL.search(data, header_end)
        header_end = m.end() if m else len(data)
    pdf.header = (0, header_end)

    lexer = Lexer(data, header_end)
    claimed: List[Span] = [pdf.header]
    xref_entries: Dict[int, int] = {}
    pending_lengths: List[Tuple[PdfObject, Ref]] = []
    startxref_value: Optional[int] = None
    trailer: Dict[str, Any] = {}
    try:
        while True:
            lexer.skip_space(comments=False)
            if lexer.pos >= len(data):
                break
            if data.startswith(b"%%EOF", lexer.pos):
                end = _skip_eol(data, lexer.pos + 5)
                if pdf.startxref and claimed[-1] == pdf.startxref and pdf.startxref[1] == lexer.pos:
                    pdf.startxref = (pdf.startxref[0], end)
                    claimed[-1] = pdf.startxref
                else:
                    claimed.append((lexer.pos, end))
                lexer.pos = end
                continue
            if data[lexer.pos:lexer.pos + 1] == b"%":
                m = EOL.search(data, lexer.pos)
                lexer.pos = m.end() if m else len(data)
                continue
            start = lexer.pos
            token = lexer.peek()
            if token is None:
                break
            if token.kind == "number":
                _parse_object(data, lexer, start, pdf, pending_lengths)
                claimed.append(pdf.objects[-1].obj_range)
            elif token.kind == "keyword" and token.value == b"xref":
                _parse_xref(data, lexer, start, pdf, xref_entries)
                claimed.append(pdf.xref)
            elif token.kind == "keyword" and token.value == b"trailer":
                lexer.next()
                trailer = parse_value(lexer)
                if not isinstance(trailer, dict):
                    raise PdfSyntaxError("trailer is not a dictionary", start)
                pdf.trailer = (start, _skip_eol(data, lexer.pos))
                lexer.pos = pdf.trailer[1]
                claimed.append(pdf.trailer)
            elif token.kind == "keyword" and token.value == b"startxref":
                lexer.next()
                offset = lexer.next()
                if offset is None or offset.kind != "number" or not isinstance(offset.value, int):
                    raise PdfSyntaxError("startxref without offset", start)
                startxref_value = offset.value
                pdf.startxref = (start, _skip_eol(data, offset.end))
                lexer.pos = pdf.startxref[1]
                claimed.append(pdf.startxref)
            else:
                raise PdfSyntaxError(f"unexpected {token.kind} at top level", start)
    except PdfSyntaxError as e:
        pdf.violations.append(_violation(str(e), (e.pos, min(len(data), e.pos + 1))))

    _cross_check(data, pdf, xref_entries, pending_lengths, startxref_value, trailer)
    pdf.gaps = complement(coalesce_spans(claimed), len(data)) if not pdf.violations else []
    return pdf


def _cross_check(data: bytes, pdf: PdfMap, xref_entries: Dict[int, int], pending_lengths, startxref_value,
                 trailer: Dict[str, Any]) -> None:
    by_number = {o.number: o for o in pdf.objects}
    for obj, ref in pending_lengths:
        target = by_number.get(ref.number)
        length = obj.stream_range[1] - obj.stream_range[0]
        if target is None or target.entries or _object_int(data, target) != length:
            pdf.violations.append(_violation(f"object {obj.number}: indirect /Length disagrees",
                                             obj.stream_range, ReasonCode.PDF_STREAM_MALFORMED))
    for number, offset in xref_entries.items():
        obj = by_number.get(number)
        if obj is None or obj.obj_range[0] != offset:
            pdf.violations.append(_violation(f"xref offset of object {number} does not point at it"))
    if pdf.violations:
        return
    if startxref_value is None:
        pdf.violations.append(_violation("missing startxref"))
    elif pdf.xref is not None and startxref_value != pdf.xref[0]:
        pdf.violations.append(_violation("startxref does not point at the xref table", pdf.startxref))
    elif pdf.xref is None and startxref_value not in {o.obj_range[0] for o in pdf.objects}:
        pdf.violations.append(_violation("startxref does not point at an xref stream", pdf.startxref))
    if not data.rstrip(b"\r\n").endswith(b"%%EOF"):
        pdf.violations.append(_violation("missing %%EOF marker", (max(0, len(data) - 8), len(data))))
    if pdf.xref is not None and not isinstance(trailer.get("Root"), Ref):
        pdf.violations.append(_violation("trailer has no /Root reference", pdf.trailer))


def _object_int(data: bytes, obj: PdfObject) -> Optional[int]:
    lexer = Lexer(data, obj.dict_range[0], obj.dict_range[1])
    token = lexer.next()
    return token.value if token is not None and token.kind == "number" else None


def lex_content(data: bytes) -> Optional[str]:
    """
    Check a decoded content stream: every token valid, operators known,
    BT/ET and q/Q never unbalanced. Returns an error message or None.
    """
    lexer = Lexer(data, keywords=CONTENT_OPERATORS, text_strings=False)
    text_depth = save_depth = 0
    try:
        while True:
            token = lexer.next()
            if token is None:
                break
            if token.kind in ("dict_open", "array_open"):
                parse_value(lexer, token)
                continue
            if token.kind in ("dict_close", "array_close"):
                return f"unbalanced delimiter at byte {token.start}"
            if token.kind != "keyword":
                continue
            op = token.value
            if op == b"BI":
                end = re.compile(rb"[\x00\t\n\x0c\r ]EI(?=[\x00\t\n\x0c\r ]|$)").search(data, lexer.pos)
                if not end:
                    return "inline image without EI"
                lexer.pos = end.end()
            elif op == b"BT":
                text_depth += 1
            elif op == b"ET":
                text_depth -= 1
            elif op == b"q":
                save_depth += 1
            elif op == b"Q":
                save_depth -= 1
            if text_depth < 0 or text_depth > 1 or save_depth < 0:
                return f"unbalanced {op.decode()} at byte {token.start}"
    except PdfSyntaxError as e:
        return str(e)
    if text_depth:
        return "BT without ET"
    return None


def lex_objects(data: bytes) -> Optional[str]:
    """Check that an object stream body is a sequence of valid object tokens."""
    lexer = Lexer(data)
    try:
        while not lexer.at_end():
            parse_value(lexer)
    except PdfSyntaxError as e:
        return str(e)
    return None


def stream_classes(pdf: PdfMap) -> Dict[int, str]:
    """Classify each stream object as content, image, font, embedded, xmp, objstm, xref or other."""
    contents: Set[int] = set()
    fonts: Set[int] = set()
    for obj in pdf.objects:
        entries = obj.entries
        ref = entries.get("Contents")
        refs = ref if isinstance(ref, list) else [ref]
        contents.update(r.number for r in refs if isinstance(r, Ref))
        for key in ("FontFile", "FontFile2", "FontFile3"):
            if isinstance(entries.get(key), Ref):
                fonts.add(entries[key].number)

    classes: Dict[int, str] = {}
    for obj in pdf.objects:
        if obj.stream_range is None:
            continue
        entries = obj.entries
        kind, subtype = entries.get("Type"), entries.get("Subtype")
        if obj.number in fonts or any(k in entries for k in ("Length1", "Length2", "Length3")) \
                or subtype in ("Type1C", "CIDFontType0C", "OpenType"):
            classes[obj.number] = "font"
        elif subtype == "Image":
            classes[obj.number] = "image"
        elif kind == "EmbeddedFile":
            classes[obj.number] = "embedded"
        elif kind == "Metadata":
            classes[obj.number] = "xmp"
        elif kind == "ObjStm":
            classes[obj.number] = "objstm"
        elif kind == "XRef":
            classes[obj.number] = "xref"
        elif obj.number in contents or subtype == "Form" or kind is None:
            classes[obj.number] = "content"
        else:
            classes[obj.number] = "other"
    return classes
