import numpy as np
import pytest

from app.domain.schema.fav_schema import Decision, FavParams, FormatKind, ReasonCode
from app.service.fav.dispatcher import detect_format, dispatch, logical_name
from app.service.fav.text_validator import check_utf8_spans, extend_to_codepoints, is_coherent
from app.service.fav.zip_container import parse_container
from app.service.fav.zip_validator import gap_guard
from app.service.manifest_service import ManifestBuilder
from app.utils.corpus.archive import make_zip
from app.utils.corpus.media import make_jpeg
from app.utils.corpus.ooxml import make_docx, make_pptx, make_xlsx
from app.utils.corpus.text import make_text
from app.utils.crypto.ctr import xor_ranges

KEY = bytes(range(32))
NONCE = bytes(16)
MEDIA = ["jpg", "jpeg", "png", "mp3", "mp4"]


def encrypt(data: bytes, start: int, length: int) -> bytes:
    return xor_ranges(data, KEY, NONCE, [(start, length)])


def trusted(path: str, data: bytes):
    builder = ManifestBuilder(MEDIA)
    builder.add_file(path, data)
    return builder.build()


def member(data: bytes, name: str):
    return next(m for m in parse_container(data).members if m.name == name)


class TestText:
    def test_clean_multiscript_text_is_benign(self, rng):
        data = make_text(rng, 4096)
        # regions that cut through multi-byte code points
        regions = [(o, 37) for o in range(1, 4000, 97)]
        assert dispatch("notes.txt", data, regions).decision == Decision.BENIGN

    def test_encrypted_span_fails_decoding(self, rng):
        data = encrypt(make_text(rng, 4096), 1000, 64)
        verdict = dispatch("notes.txt.enc", data, [(1000, 64)])
        assert verdict.format == FormatKind.TEXT
        assert verdict.reasons == [ReasonCode.UTF8_DECODE_FAIL]

    def test_codepoint_widening_is_bounded(self):
        data = "x€y".encode()  # € is three bytes
        assert extend_to_codepoints(data, 2, 3) == (1, 4)
        assert extend_to_codepoints(b"a" + b"\x80" * 8, 8, 9) == (5, 9)

    def test_coherence_heuristic_is_opt_in(self):
        gibberish = bytes(range(1, 32)) * 4
        assert check_utf8_spans(gibberish, [(0, len(gibberish))]) == []
        findings = check_utf8_spans(gibberish, [(0, len(gibberish))], nlp_heuristic=True)
        assert [f.reason for f in findings] == [ReasonCode.TEXT_INCOHERENT]
        assert is_coherent("plain words in a sentence")


class TestZip:
    def test_clean_archive_is_benign(self, rng):
        data = make_zip(rng, nested=True, media=True)
        verdict = dispatch("a.zip", data, [(0, len(data))], trusted("a.zip", data))
        assert verdict.decision == Decision.BENIGN, verdict.findings

    def test_stored_media_needs_manifest(self, rng):
        data = make_zip(rng, nested=False, media=True)
        verdict = dispatch("a.zip", data, [(0, len(data))])
        assert verdict.reasons == [ReasonCode.ZIP_MEMBER_UNVERIFIED]

    def test_encrypted_deflate_stream(self, rng):
        data = make_zip(rng, nested=False, media=True)
        start, end = member(data, "docs/readme.txt").payload_range
        offset = start + max(0, (end - start) // 2 - 32)
        mutated = encrypt(data, offset, min(64, end - offset))
        verdict = dispatch("a.zip", mutated, [(offset, 64)], trusted("a.zip", data))
        assert verdict.suspicious
        assert set(verdict.reasons) <= {ReasonCode.ZIP_INFLATE_FAIL, ReasonCode.ZIP_CRC_MISMATCH,
                                        ReasonCode.ZIP_STRUCT_VIOLATION}

    def test_encrypted_local_header(self, rng):
        data = make_zip(rng, nested=False, media=True)
        verdict = dispatch("a.zip", encrypt(data, 1, 3), [(1, 3)], trusted("a.zip", data))
        assert ReasonCode.ZIP_STRUCT_VIOLATION in verdict.reasons

    def test_depth_budget(self, rng):
        data = make_zip(rng, nested=True, media=False)
        params = FavParams(depth=0)
        verdict = dispatch("a.zip", data, [(0, len(data))], trusted("a.zip", data), params)
        assert ReasonCode.ZIP_BUDGET_EXHAUSTED in verdict.reasons

    def test_byte_budget(self, rng):
        data = make_zip(rng, nested=False, media=False)
        verdict = dispatch("a.zip", data, [(0, len(data))], None, FavParams(byte_budget=10))
        assert verdict.reasons == [ReasonCode.ZIP_BUDGET_EXHAUSTED]

    def test_gap_guard(self):
        uniform = np.random.default_rng(0).integers(0, 256, size=4096, dtype=np.uint8).tobytes()
        assert not gap_guard(uniform)
        assert not gap_guard(bytes(range(16)))
        assert gap_guard(b"\x00" * 32)
        assert not gap_guard(b"\x00" * 65)
        assert gap_guard(b"")


class TestOoxml:
    @pytest.mark.parametrize("name,make", [
        ("r.docx", lambda rng: make_docx(rng, picture=True)),
        ("s.xlsx", make_xlsx),
        ("p.pptx", lambda rng: make_pptx(rng, picture=True)),
    ])
    def test_clean_package_is_benign(self, rng, name, make):
        data = make(rng)
        verdict = dispatch(name, data, [(0, len(data))], trusted(name, data))
        assert verdict.decision == Decision.BENIGN, verdict.findings
        assert verdict.format.is_ooxml

    def test_encrypted_document_part(self, rng):
        data = make_docx(rng, picture=False)
        start, end = member(data, "word/document.xml").payload_range
        offset = start + (end - start) // 2
        mutated = encrypt(data, offset, 64)
        verdict = dispatch("r.docx.enc", mutated, [(offset, 64)], trusted("r.docx", data))
        assert verdict.format == FormatKind.DOCX
        assert verdict.suspicious

    def test_modified_media_part(self, rng):
        data = make_pptx(rng, picture=True)
        start, end = member(data, "ppt/media/image1.png").payload_range
        mutated = encrypt(data, start + 100, 64)
        verdict = dispatch("p.pptx", mutated, [(start + 100, 64)], trusted("p.pptx", data))
        assert verdict.suspicious


class TestDispatcher:
    def test_detect_format(self, rng):
        docx = make_docx(rng, picture=False)
        assert detect_format("a/r.docx.enc", docx) == FormatKind.DOCX
        assert detect_format("a/archive.bin", docx) == FormatKind.ZIP
        assert detect_format("a/broken.pdf", bytes(64)) == FormatKind.PDF
        assert detect_format("a/photo", make_jpeg(rng, 2048)) == FormatKind.MEDIA
        assert detect_format("a/blob", "plain words".encode()) == FormatKind.TEXT
        assert detect_format("a/blob", b"\x81\xfe\x00\xff") == FormatKind.UNKNOWN

    def test_clone_suffix_is_stripped(self):
        assert logical_name("x/report.pdf.enc") == "x/report.pdf"
        assert logical_name(".enc") == ".enc"

    def test_unknown_format_escalates(self):
        verdict = dispatch("a/blob", b"\x81\xfe\x00\xff" * 10, [(0, 8)])
        assert verdict.reasons == [ReasonCode.UNSUPPORTED_FORMAT_ESCALATED]

    def test_no_regions_is_benign(self):
        assert dispatch("a/blob", b"\x81\xfe", []).decision == Decision.BENIGN
        assert dispatch("a/empty.txt", b"", [(0, 10)]).decision == Decision.BENIGN

    def test_media_whitelist(self, rng):
        photo = make_jpeg(rng, 4096)
        manifest = trusted("m/photo.jpg", photo)
        regions = [(0, len(photo))]
        assert not dispatch("m/photo.jpg", photo, regions, manifest).suspicious
        assert not dispatch("m/copy.jpg", photo, regions, manifest).suspicious
        tampered = encrypt(photo, 512, 64)
        assert dispatch("m/photo.jpg", tampered, regions, manifest).reasons == [ReasonCode.MEDIA_HASH_MISMATCH]
        assert dispatch("m/photo.jpg.enc", tampered, regions, manifest).reasons == [ReasonCode.MEDIA_UNVERIFIED]
        verdict = dispatch("m/photo.jpg", tampered, [(500, 100), (3000, 10)], manifest)
        assert verdict.findings[0].detail == "1 blocks differ from manifest"
        # only blocks under the regions are hashed
        assert not dispatch("m/photo.jpg", tampered, [(1024, 512)], manifest).suspicious
