import base64
import zlib

import pytest

from app.domain.schema.fav_schema import FavParams, ReasonCode
from app.service.fav.dispatcher import dispatch
from app.service.fav.pdf_filters import (
    FilterError,
    ascii85_decode,
    asciihex_decode,
    decode_stream,
    flate_decode,
    png_unpredict,
    runlength_decode,
)
from app.service.fav.pdf_parser import lex_content, lex_objects, parse_pdf, stream_classes
from app.service.fav.pdf_validator import is_well_formed_xml, validate_pdf
from app.service.manifest_service import ManifestBuilder
from app.utils.corpus.pdf import make_pdf
from app.utils.crypto.ctr import xor_ranges

KEY = bytes(range(32))
NONCE = bytes(16)


def encrypt(data: bytes, start: int, length: int) -> bytes:
    return xor_ranges(data, KEY, NONCE, [(start, length)])


def trusted(path: str, data: bytes):
    builder = ManifestBuilder(["jpg", "png"])
    builder.add_file(path, data)
    return builder.build()


def stream_of(data: bytes, kind: str):
    pdf = parse_pdf(data)
    number = next(n for n, k in stream_classes(pdf).items() if k == kind)
    return pdf.object(number)


@pytest.fixture
def pdf_bytes(rng):
    return make_pdf(rng, pages=2)


def test_generated_pdf_parses_cleanly(pdf_bytes):
    pdf = parse_pdf(pdf_bytes)
    assert pdf.violations == []
    assert pdf.version == "1.7"
    kinds = sorted(stream_classes(pdf).values())
    assert kinds == ["content", "content", "font", "image", "xmp"]


def test_clean_pdf_is_benign(pdf_bytes):
    verdict = dispatch("d.pdf", pdf_bytes, [(0, len(pdf_bytes))], trusted("d.pdf", pdf_bytes))
    assert not verdict.suspicious, verdict.findings


def test_opaque_streams_need_manifest(pdf_bytes):
    verdict = dispatch("d.pdf", pdf_bytes, [(0, len(pdf_bytes))])
    assert verdict.reasons == [ReasonCode.PDF_COMPONENT_UNVERIFIED]


def test_encrypted_content_stream(pdf_bytes):
    obj = stream_of(pdf_bytes, "content")
    start, end = obj.stream_range
    offset = start + (end - start) // 2 - 32
    mutated = encrypt(pdf_bytes, offset, 64)
    verdict = dispatch("d.pdf.enc", mutated, [(offset, 64)], trusted("d.pdf", pdf_bytes))
    assert verdict.suspicious
    assert set(verdict.reasons) <= {ReasonCode.PDF_FILTER_DECODE_FAIL, ReasonCode.PDF_STREAM_MALFORMED}


def test_modified_font_program(pdf_bytes):
    obj = stream_of(pdf_bytes, "font")
    start, _ = obj.stream_range
    mutated = encrypt(pdf_bytes, start + 40, 64)
    verdict = dispatch("d.pdf", mutated, [(start + 40, 64)], trusted("d.pdf", pdf_bytes))
    assert set(verdict.reasons) & {ReasonCode.PDF_FILTER_DECODE_FAIL, ReasonCode.PDF_COMPONENT_UNVERIFIED}


def test_missing_header_is_a_violation(pdf_bytes):
    mutated = encrypt(pdf_bytes, 0, 8)
    verdict = validate_pdf("d.pdf", mutated, [(0, 8)], FavParams())
    assert verdict.reasons == [ReasonCode.PDF_STRUCT_VIOLATION]


def test_untouched_streams_are_not_checked(pdf_bytes):
    # opaque streams would be unverified without a manifest, but only the header is in range
    verdict = validate_pdf("d.pdf", pdf_bytes, [(0, 4)], FavParams())
    assert not verdict.suspicious


class TestFilters:
    def test_asciihex(self):
        assert asciihex_decode(b"48 65 6C\n6C 6F>") == b"Hello"
        assert asciihex_decode(b"4865 6>") == b"He`"
        with pytest.raises(FilterError):
            asciihex_decode(b"4865")

    def test_ascii85(self):
        encoded = base64.a85encode(b"hello world") + b"~>"
        assert ascii85_decode(encoded) == b"hello world"
        assert ascii85_decode(b"<~" + encoded) == b"hello world"
        with pytest.raises(FilterError):
            ascii85_decode(b"87cURD]i")

    def test_runlength(self):
        assert runlength_decode(bytes([2]) + b"abc" + bytes([254]) + b"z" + bytes([128])) == b"abczzz"
        with pytest.raises(FilterError):
            runlength_decode(bytes([5]) + b"ab")
        with pytest.raises(FilterError):
            runlength_decode(bytes([0]) + b"a")

    def test_png_predictor_rows(self):
        rows = bytes([0, 1, 2, 3, 2, 1, 1, 1])
        assert png_unpredict(rows, colors=1, bits=8, columns=3) == bytes([1, 2, 3, 2, 3, 4])
        assert png_unpredict(bytes([1, 5, 1, 1]), columns=3) == bytes([5, 6, 7])
        with pytest.raises(FilterError):
            png_unpredict(bytes([9, 0, 0, 0]), columns=3)
        with pytest.raises(FilterError):
            png_unpredict(bytes(5), columns=3)

    def test_flate_boundaries(self):
        packed = zlib.compress(b"q Q\n" * 50)
        assert flate_decode(packed + b"\r\n", 10_000) == b"q Q\n" * 50
        with pytest.raises(FilterError):
            flate_decode(packed + b"junk", 10_000)
        with pytest.raises(FilterError):
            flate_decode(packed[:-6], 10_000)
        with pytest.raises(FilterError):
            flate_decode(packed, 10)

    def test_filter_chain(self):
        packed = base64.a85encode(zlib.compress(b"BT ET")) + b"~>"
        assert decode_stream(packed, ["ASCII85Decode", "FlateDecode"], []) == b"BT ET"
        with pytest.raises(FilterError):
            decode_stream(b"", ["DCTDecode"], [])


class TestLexers:
    def test_content_operators(self):
        assert lex_content(b"q 1 0 0 1 0 0 cm BT /F1 12 Tf (hi) Tj [(a) -20 (b)] TJ ET Q") is None
        assert lex_content(b"BT BT ET ET") is not None
        assert lex_content(b"q Q Q") is not None
        assert lex_content(b"BT /F1 12 Tf") == "BT without ET"
        assert lex_content(b"12 frobnicate") is not None

    def test_object_stream_body(self):
        assert lex_objects(b"<</Type /Font>> [1 2 3] (text) 4 0 R") is None
        assert lex_objects(b"<</Type /Font") is not None

    def test_xml_well_formedness(self):
        assert is_well_formed_xml(b"<a><b/></a>")
        assert not is_well_formed_xml(b"<a><b></a>")
        assert not is_well_formed_xml(b"\xff<a/>")
