import zlib
from pathlib import Path

import numpy as np
import pytest
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from hypothesis import given, strategies as st

from app.domain.schema.attack_schema import Animagus, CampaignMode, CampaignRequest, CipherSpec, Fast, SkipStep
from app.service.mapping_service import MappingService, read_file
from app.service.peersim_service import (
    BLACK_BASTA,
    PeersimService,
    apply_attack,
    black_basta_preset,
    decrypt_ranges,
    encrypted_ranges,
    file_nonce,
    parse_pattern,
    schedule_label,
    seeded_cipher,
)
from app.utils.crypto.ctr import keystream, xor_ranges
from app.utils.exceptions.exceptions import ArgumentError, LayoutError

KEY = bytes(range(32))
NONCE = bytes(range(16, 32))


def test_keystream_matches_library_ctr():
    direct = Cipher(algorithms.AES(KEY), modes.CTR(NONCE)).encryptor().update(bytes(1000))
    assert keystream(KEY, NONCE, 0, 1000) == direct
    assert keystream(KEY, NONCE, 333, 500) == direct[333:833]


def test_counter_wraps_at_128_bits():
    nonce = b"\xff" * 16
    assert len(keystream(KEY, nonce, 5000, 64)) == 64


@given(st.binary(min_size=1, max_size=3000), st.lists(st.tuples(st.integers(0, 2999), st.integers(0, 400)),
                                                     max_size=6))
def test_xor_ranges_is_an_involution(data, raw_ranges):
    ranges = [(o, min(n, len(data) - o)) for o, n in raw_ranges if o < len(data)]
    once = xor_ranges(data, KEY, NONCE, ranges)
    assert xor_ranges(once, KEY, NONCE, ranges) == data


@given(st.integers(1, 20_000), st.integers(1, 600), st.integers(0, 600))
def test_skip_step_byte_accounting(size, n, s):
    ranges = encrypted_ranges(SkipStep(n=n, s=s), size, np.random.default_rng(0))
    marked = bytearray(size)
    for offset in range(0, size, n + s):
        for i in range(offset, min(offset + n, size)):
            marked[i] = 1
    assert sum(length for _, length in ranges) == sum(marked)
    stripes = -(-size // (n + s))
    last = size - (stripes - 1) * (n + s)
    assert sum(length for _, length in ranges) == (stripes - 1) * n + min(n, last)


def test_fast_and_animagus_ranges():
    rng = np.random.default_rng(1)
    assert encrypted_ranges(Fast(n=4096), 1000, rng) == [(0, 1000)]
    ranges = encrypted_ranges(Animagus(f=25), 40 * 512 + 100, rng)
    assert len(ranges) == 41 * 25 // 100
    assert all(offset % 512 == 0 for offset, _ in ranges)


def test_parse_pattern():
    assert parse_pattern("fast:4096") == [Fast(n=4096)]
    assert schedule_label(parse_pattern("skip:64,128+animagus:25")) == "skip:64,128+animagus:25"
    assert parse_pattern("BlackBasta") == BLACK_BASTA
    for bad in ("fast", "skip:64", "animagus:0", "animagus:101", "chacha:1", "fast:-3"):
        with pytest.raises(ArgumentError):
            parse_pattern(bad)


def test_black_basta_tiers():
    assert black_basta_preset(4000) == [Fast(n=4000)]
    assert black_basta_preset(10_000) == [SkipStep(n=64, s=128)]
    assert black_basta_preset(5000) == [SkipStep(n=64, s=128)]
    assert black_basta_preset((1 << 30) - 1) == [SkipStep(n=64, s=128)]
    for size in (1 << 30, 2 << 30):
        large = black_basta_preset(size)
        assert large[0] == Fast(n=5000)
        assert large[1] == SkipStep(n=64, s=6336, start=5000)


def test_nonces_differ_for_colliding_path_checksums():
    assert zlib.crc32(b"plumless") == zlib.crc32(b"buckeroo")
    assert file_nonce(3, "plumless") != file_nonce(3, "buckeroo")
    assert file_nonce(3, "a.txt") != file_nonce(4, "a.txt")
    assert len(file_nonce(3, "a.txt")) == 16


def test_attack_is_reversible(rng):
    data = rng.integers(0, 256, size=10_000, dtype=np.uint8).tobytes()
    cipher = seeded_cipher(3)
    mutated, ranges = apply_attack(data, parse_pattern("skip:64,128"), cipher, 3, "a/b.txt")
    assert mutated != data
    assert decrypt_ranges(mutated, ranges, cipher, 3, "a/b.txt") == data
    untouched = [i for i in range(len(data)) if not any(o <= i < o + n for o, n in ranges)]
    assert all(mutated[i] == data[i] for i in untouched[:2000])


def test_empty_schedule_rejected():
    with pytest.raises(ArgumentError):
        apply_attack(b"abc", [], seeded_cipher(0), 0)


@pytest.fixture
def device(settings, snapstore, document_corpus):
    mapping = MappingService(settings)
    peersim = PeersimService(snapstore, mapping, settings)
    peersim.init_device(16384)
    layout, epoch = peersim.write_corpus(document_corpus)
    assert epoch == 1
    return peersim, layout


def test_clone_campaign_ground_truth(device):
    peersim, layout = device
    targets = [f.path for f in layout.files][:4]
    result = peersim.run_campaign(layout, parse_pattern("fast:4096"), seeded_cipher(9), 9,
                                  CampaignMode.CLONE, targets)
    truth = result.ground_truth
    assert result.epoch == 2
    assert truth.positive_files == sorted(f"{p}.enc" for p in targets)
    assert set(truth.negative_files) == {f.path for f in layout.files}
    assert len(result.layout.files) == len(layout.files) + 4

    image = peersim.snapstore.reconstruct(2)
    bitmap = peersim.snapstore.load_bitmap(2)
    assert all(bitmap.bits[b] for b in truth.device_blocks)
    for path in targets:
        original = read_file(image, layout.get(path))
        clone = read_file(image, result.layout.get(f"{path}.enc"))
        restored = decrypt_ranges(clone, truth.files[f"{path}.enc"], seeded_cipher(9), 9, f"{path}.enc")
        assert restored == original


def test_inplace_campaign_overwrites_originals(device, document_corpus):
    peersim, layout = device
    target = layout.files[0].path
    result = peersim.run_campaign(layout, parse_pattern("skip:4096,4096"), seeded_cipher(2), 2,
                                  CampaignMode.INPLACE, [target])
    assert result.ground_truth.positive_files == [target]
    image = peersim.snapstore.reconstruct(result.epoch)
    mutated = read_file(image, layout.get(target))
    assert mutated != (Path(document_corpus) / target).read_bytes()
    ranges = result.ground_truth.files[target]
    assert decrypt_ranges(mutated, ranges, seeded_cipher(2), 2, target) == (Path(document_corpus) / target).read_bytes()


def test_campaign_rejects_bad_targets(device):
    peersim, layout = device
    with pytest.raises(LayoutError):
        peersim.run_campaign(layout, parse_pattern("fast:16"), seeded_cipher(0), targets=["missing.txt"])
    target = layout.files[0].path
    result = peersim.run_campaign(layout, parse_pattern("fast:16"), seeded_cipher(0), targets=[target])
    with pytest.raises(LayoutError):
        peersim.run_campaign(result.layout, parse_pattern("fast:16"), seeded_cipher(0), targets=[target])


def test_simulate_persists_layout_and_result(device, tmp_path):
    peersim, layout = device
    layout_path = tmp_path / "layout.json"
    peersim.mapping.save_layout(layout, layout_path)
    request = CampaignRequest(pattern="animagus:25", layout_path=str(layout_path), seed=4,
                              result_path=str(tmp_path / "truth.json"))
    result = peersim.simulate(request)
    assert (tmp_path / "truth.json").is_file()
    assert len(peersim.mapping.load_layout(layout_path).files) == len(result.layout.files)

    with pytest.raises(ArgumentError):
        peersim.simulate(request.model_copy(update={"key_hex": "zz"}))


def test_cipher_key_validation():
    assert CipherSpec(key_hex="AB" * 32).key_hex == "ab" * 32
    with pytest.raises(ValueError):
        CipherSpec(key_hex="00" * 31)
