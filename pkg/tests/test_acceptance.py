"""End-to-end detection quality over synthetic corpora."""
import time

import numpy as np
import pytest

from app.domain.schema.attack_schema import CampaignMode
from app.service.experiment_service import SWEEP_N_VALUES, ExperimentService
from app.service.manifest_service import build_manifest
from app.service.mapping_service import MappingService
from app.service.peersim_service import PeersimService, parse_pattern, seeded_cipher
from app.service.pipeline_service import PipelineService
from app.service.snapstore_service import SnapstoreService
from app.utils.corpus import build_corpus
from app.utils.corpus.media import MEDIA_MAKERS
from app.utils.exceptions.exceptions import ArgumentError

MEDIA = ["jpg", "jpeg", "png", "mp3", "mp4"]
# media sizes of the 16.4 MB evaluation corpus
PERF_MEDIA_SIZES = {"jpg": 142294, "png": 71291, "mp3": 480967, "mp4": 16172912}


@pytest.mark.parametrize("pattern", ["fast:4096", "skip:4096,4096", "animagus:25"])
def test_clone_protocol_confusion(settings, document_corpus, pattern):
    run = ExperimentService(settings).clone_protocol(document_corpus, parse_pattern(pattern), seed=7)
    file_level = run.report.file_level
    assert (file_level.tp, file_level.tn, file_level.fp, file_level.fn) == (10, 12, 0, 0)
    assert run.scores.file_level.accuracy == 1.0
    assert run.scores.file_level.f1 == 1.0
    assert run.report.block_level.fn == 0
    assert run.scores.block_level.recall == 1.0
    assert len(run.originals) == 10 and len(run.extras) == 2


def test_protocol_needs_enough_files(settings, tmp_path):
    build_corpus(tmp_path, {"txt": 3})
    with pytest.raises(ArgumentError):
        ExperimentService(settings).clone_protocol(tmp_path, parse_pattern("fast:16"))


def test_skip_step_sweep_detects_every_file(settings, document_corpus):
    points = ExperimentService(settings).granularity_sweep(document_corpus, SWEEP_N_VALUES, 128)
    assert {p.n for p in points} == set(SWEEP_N_VALUES)
    missed = [(p.format, p.n) for p in points if p.rate < 1.0]
    assert missed == []


def test_validators_match_or_beat_per_format_baselines(settings, mixed_corpus_dir):
    rows = ExperimentService(settings).baseline_comparison(mixed_corpus_dir, n_values=(64, 128))
    assert {r.n for r in rows} == {64, 128}
    assert {"Text", "Zip", "Docx", "Pdf"} <= {r.format for r in rows}
    assert rows[0].clean_fp == {"fav": 0, "entropy": 0, "chi2": 0}
    for row in rows:
        assert row.fav == row.total
        assert row.fav >= row.entropy
        assert row.fav >= row.chi2


def test_baseline_detection_falls_with_stripe_width(settings, mixed_corpus_dir):
    rows = ExperimentService(settings).baseline_comparison(mixed_corpus_dir, n_values=(4, 64, 512))
    for method in ("entropy", "chi2"):
        by_n = {n: sum(getattr(r, method) for r in rows if r.n == n) for n in (4, 64, 512)}
        assert by_n[4] <= by_n[64] <= by_n[512]
    assert all(r.fav == r.total for r in rows)


def test_shared_tuning_covers_every_format(settings, mixed_corpus_dir):
    shared = ExperimentService(settings).baseline_comparison(mixed_corpus_dir, n_values=(64,), per_format=False)
    assert shared[0].clean_fp == {"fav": 0, "entropy": 0, "chi2": 0}
    assert all(r.fav == r.total for r in shared)


def test_clean_mixed_corpus_raises_no_alarm(settings, snapstore, mixed_corpus_dir, mixed_manifest):
    mapping = MappingService(settings)
    peersim = PeersimService(snapstore, mapping, settings)
    peersim.init_device(16384)
    layout, epoch = peersim.write_corpus(mixed_corpus_dir)
    report = PipelineService(snapstore, settings, mapping).detect(epoch, epoch, layout, mixed_manifest)
    assert report.suspicious_ranges > 0
    assert report.verdicts
    assert report.suspicious_files == []


@pytest.mark.slow
def test_structured_formats_detected_at_every_stripe_width(settings, tmp_path):
    build_corpus(tmp_path, {fmt: 50 for fmt in ("txt", "zip", "docx", "pdf")}, seed=13)
    points = ExperimentService(settings).granularity_sweep(tmp_path, SWEEP_N_VALUES, 128)
    assert {p.format for p in points} == {"Text", "Zip", "Docx", "Pdf"}
    assert all(p.total == 50 for p in points)
    missed = [(p.format, p.n, p.detected) for p in points if p.rate < 1.0]
    assert missed == []


@pytest.mark.slow
@pytest.mark.parametrize("n, floor", [(1, 0.90), (2, 0.93)])
def test_narrow_stripes_in_text(settings, tmp_path, n, floor):
    build_corpus(tmp_path, {"txt": 140}, seed=17)
    points = ExperimentService(settings).granularity_sweep(tmp_path, [n], 128,
                                                           manifest=build_manifest(tmp_path, MEDIA))
    (point,) = points
    assert point.format == "Text" and point.total == 140
    assert floor <= point.rate <= 1.0


@pytest.mark.slow
def test_clone_protocol_over_larger_corpus(settings, tmp_path):
    build_corpus(tmp_path, {fmt: 10 for fmt in ("txt", "zip", "docx", "xlsx", "pptx", "pdf")}, seed=23)
    service = ExperimentService(settings)
    for pattern in ("skip:64,128", "blackbasta"):
        run = service.clone_protocol(tmp_path, parse_pattern(pattern), seed=3)
        assert run.report.file_level.fn == 0
        assert run.report.file_level.fp == 0


@pytest.mark.slow
def test_fav_cost_tracks_encrypted_volume(settings, tmp_path):
    root = tmp_path / "corpus"
    build_corpus(root, {"txt": 2, "zip": 1, "docx": 1, "xlsx": 1, "pptx": 1, "pdf": 2}, seed=31)
    rng = np.random.default_rng(31)
    for ext, size in PERF_MEDIA_SIZES.items():
        (root / ext).mkdir()
        (root / ext / f"{ext}_000.{ext}").write_bytes(MEDIA_MAKERS[ext](rng, size))
    manifest = build_manifest(root, MEDIA)
    corpus_bytes = sum(p.stat().st_size for p in root.rglob("*") if p.is_file())
    device_blocks = (2 * corpus_bytes // 4096 + 8) * 8

    fav_seconds = {}
    for index, pattern in enumerate(("skip:4096,4096", "animagus:25")):
        runs = []
        for attempt in range(3):
            snapstore = SnapstoreService(str(tmp_path / f"store-{index}-{attempt}"), settings)
            mapping = MappingService(settings)
            peersim = PeersimService(snapstore, mapping, settings)
            peersim.init_device(device_blocks)
            layout, _ = peersim.write_corpus(root)
            campaign = peersim.run_campaign(layout, parse_pattern(pattern), seeded_cipher(3), 3,
                                            CampaignMode.INPLACE)
            started = time.perf_counter()
            report = PipelineService(snapstore, settings, mapping).detect(campaign.epoch, campaign.epoch,
                                                                          campaign.layout, manifest)
            assert time.perf_counter() - started < 120
            assert "mp4/mp4_000.mp4" in report.suspicious_files
            runs.append(report.timings.fav)
        fav_seconds[pattern] = min(runs)

    assert fav_seconds["skip:4096,4096"] >= 1.1 * fav_seconds["animagus:25"]
