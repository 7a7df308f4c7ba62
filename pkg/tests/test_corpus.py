import numpy as np
import pytest

from app.utils.corpus import MIXED_FORMATS, build_corpus, mixed_corpus, package_file
from app.utils.corpus.media import coded_payload
from app.utils.stats.chi2 import chi_squared, shannon_entropy
from app.utils.corpus.text import make_text, pad_needed, tail_ok


@pytest.mark.parametrize("fmt", MIXED_FORMATS)
def test_packaged_files_follow_size_rules(fmt):
    rng = np.random.default_rng(99)
    for _ in range(3):
        data = package_file(fmt, rng)
        assert len(data) >= 4 * 512
        assert tail_ok(len(data))


def test_unknown_format_rejected(rng):
    with pytest.raises(ValueError):
        package_file("exe", rng)


def test_build_is_deterministic(tmp_path):
    first = build_corpus(tmp_path / "a", {"pdf": 2, "txt": 2}, seed=3)
    second = build_corpus(tmp_path / "b", {"txt": 2, "pdf": 2}, seed=3)
    assert [p.relative_to(tmp_path / "a") for p in first] == [p.relative_to(tmp_path / "b") for p in second]
    assert all(a.read_bytes() == b.read_bytes() for a, b in zip(first, second))
    assert first[0].name == "pdf_000.pdf"


def test_mixed_corpus_cycles_formats(tmp_path):
    written = mixed_corpus(tmp_path, 13, seed=1, formats=["txt", "zip", "jpg"])
    names = sorted(p.parent.name for p in written)
    assert names.count("txt") == 5 and names.count("zip") == 4 and names.count("jpg") == 4


def test_text_is_exact_and_valid(rng):
    for size in (2048, 2111, 8192):
        data = make_text(rng, size)
        assert len(data) == size
        data.decode("utf-8")


def test_tail_padding():
    assert pad_needed(512) == 0
    assert pad_needed(513) == 63
    assert pad_needed(600) == 0
    assert not tail_ok(520) and tail_ok(576)


def test_media_payload_is_skewed_but_dense(rng):
    payload = coded_payload(rng, 64 * 1024)
    assert len(payload) == 64 * 1024
    assert shannon_entropy(payload) > 7.9
    # sampling noise alone puts uniform bytes near 255
    assert chi_squared(payload) > 300
