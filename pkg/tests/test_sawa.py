import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st
from pydantic import ValidationError

from app.domain.schema.delta_schema import DeltaBlock, DeltaSnapshot
from app.domain.schema.sawa_schema import SawaParams, tile_blocks
from app.service.sawa_service import SawaService, chi_profile, scan
from app.utils.stats.chi2 import chi_squared


def reference_scan(data: bytes, w: int, s: int, tau: float):
    """Stride-by-stride slide, doubling expansion and an exhaustive shrink."""
    n = len(data)
    spans = []
    p = 0
    while p + w <= n:
        if chi_squared(data[p:p + w]) > tau:
            p += s
            continue
        length = w
        while p + 2 * length <= n and chi_squared(data[p:p + 2 * length]) <= tau:
            length *= 2
        upper = n - p if p + 2 * length > n else 2 * length - 1
        best = max(L for L in range(length, upper + 1) if chi_squared(data[p:p + L]) <= tau)
        spans.append((p, best))
        p += best
    return spans


def mixed_block(seed: int, size: int = 4096) -> bytes:
    """Lowercase prose, a uniform stretch and a constant tail in seeded proportions."""
    rng = np.random.default_rng(seed)
    cut1, cut2 = sorted(int(c) for c in rng.integers(0, size, size=2))
    prose = rng.integers(97, 123, size=cut1, dtype=np.uint8).tobytes()
    noise = rng.integers(0, 256, size=cut2 - cut1, dtype=np.uint8).tobytes()
    return prose + noise + b"\x00" * (size - cut2)


def delta_of(*payloads: bytes, gap: int = 4096) -> DeltaSnapshot:
    deltas, offset = [], 0
    for payload in payloads:
        deltas.append(DeltaBlock(device_offset=offset, new_bytes=payload, old_bytes=bytes(len(payload))))
        offset += len(payload) + gap
    return DeltaSnapshot(e_i=1, e_j=1, deltas=deltas)


@hsettings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_exact_shrink_matches_brute_force(seed):
    data = mixed_block(seed)
    params = SawaParams(w=16, s=8, tau=350.0, shrink="exact")
    assert [(p, n) for p, n, _ in scan(data, params)] == reference_scan(data, 16, 8, 350.0)


@pytest.mark.slow
def test_exact_shrink_matches_brute_force_hundred_blocks():
    params = SawaParams(w=16, s=8, tau=350.0, shrink="exact")
    for seed in range(100):
        data = mixed_block(seed)
        assert [(p, n) for p, n, _ in scan(data, params)] == reference_scan(data, 16, 8, 350.0)


@pytest.mark.parametrize("shrink", ["bisect", "exact"])
def test_uniform_block_is_one_range(shrink):
    data = np.random.default_rng(7).integers(0, 256, size=4096, dtype=np.uint8).tobytes()
    spans = scan(data, SawaParams(shrink=shrink))
    assert len(spans) == 1
    start, length, c = spans[0]
    assert length >= 4096 - 16
    last_start, last_length = reference_scan(data, 16, 8, 350.0)[-1]
    assert start + length == last_start + last_length
    assert c <= 350.0


def test_chi_profile_matches_pointwise():
    data = np.random.default_rng(3).integers(0, 40, size=300, dtype=np.uint8).tobytes()
    profile = chi_profile(data, 10)
    for L in (1, 17, 100, 290):
        assert profile[L - 1] == pytest.approx(chi_squared(data[10:10 + L]), rel=1e-12)


def test_small_alphabet_is_not_suspicious(settings):
    table = np.random.default_rng(4).integers(0, 4, size=4096, dtype=np.uint8).tobytes()
    result = SawaService(settings).analyze(delta_of(table))
    assert result.suspicious == []
    assert result.scanned_bytes == 4096


def test_small_deltas_are_forwarded(settings):
    noise = np.random.default_rng(1).integers(0, 256, size=4096, dtype=np.uint8).tobytes()
    result = SawaService(settings).analyze(delta_of(b"\x07\x08\x09", noise))
    assert len(result.forwarded_small) == 1
    assert result.forwarded_small[0].device_offset == 0
    assert result.suspicious[0].device_offset >= 3 + 4096
    assert 0 in result.positive_blocks()


def test_ranges_are_sorted_and_tiled(settings):
    rng = np.random.default_rng(2)
    blocks = [rng.integers(0, 256, size=2048, dtype=np.uint8).tobytes() for _ in range(3)]
    result = SawaService(settings.model_copy(update={"WORKERS": 3})).analyze(delta_of(*blocks, gap=1000))
    offsets = [r.device_offset for r in result.suspicious]
    assert offsets == sorted(offsets)
    for r in result.suspicious:
        assert sum(end - start for _, start, end in r.covered_blocks) == r.length


def test_flag_all_covers_every_byte(settings):
    delta = delta_of(b"abc", b"plain text that is long enough")
    result = SawaService(settings).flag_all(delta)
    assert [(r.device_offset, r.length) for r in result.suspicious] == [(d.device_offset, d.length)
                                                                        for d in delta.deltas]


def test_tile_blocks_splits_on_block_edges():
    assert tile_blocks(500, 600, 512) == [(0, 500, 512), (1, 0, 512), (2, 0, 76)]


def test_stride_wider_than_window_rejected():
    with pytest.raises(ValidationError):
        SawaParams(w=8, s=16)
