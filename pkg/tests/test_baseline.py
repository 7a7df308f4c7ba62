import numpy as np
import pytest

from app.domain.schema.attack_schema import SkipStep
from app.service.baseline_service import BaselineService, classify, detection_rate, tune
from app.service.peersim_service import apply_attack, seeded_cipher
from app.utils.exceptions.exceptions import ArgumentError
from app.utils.stats.chi2 import chi_squared, shannon_entropy


def test_tuned_thresholds_flag_no_clean_file(settings, mixed_corpus_dir):
    service = BaselineService(settings)
    params = service.tune_corpus(mixed_corpus_dir)
    for method in ("entropy", "chi2"):
        decisions = service.evaluate(params, mixed_corpus_dir, method)
        assert len(decisions) == 20
        assert not any(decisions.values())


def test_thresholds_sit_just_past_the_clean_extremes():
    files = [b"aaaa", bytes(range(256)), b"abcabc"]
    params = tune(files)
    assert params.entropy_threshold > shannon_entropy(bytes(range(256)))
    assert params.entropy_threshold == pytest.approx(8.0)
    assert params.chi2_threshold < 0.0
    assert params.chi2_threshold == pytest.approx(min(chi_squared(f) for f in files))


def test_tuning_needs_data(settings):
    with pytest.raises(ArgumentError):
        tune([b"", b""])
    with pytest.raises(ArgumentError):
        BaselineService(settings).tune_corpus("/no/such/corpus")


def test_encrypted_text_is_flagged_by_entropy(rng):
    clean = [("abcdefgh" * 512).encode()]
    params = tune(clean)
    noise = rng.integers(0, 256, size=4096, dtype=np.uint8).tobytes()
    assert classify(params, noise, "entropy")
    assert classify(params, noise, "chi2")
    assert not classify(params, b"", "entropy")
    assert detection_rate(params, [], "entropy") == 0.0


def test_intermittent_encryption_slips_under_tuned_baselines(settings, mixed_corpus_dir):
    service = BaselineService(settings)
    params = service.tune_corpus(mixed_corpus_dir)
    text_files = [p.read_bytes() for p in sorted((mixed_corpus_dir / "txt").iterdir())]
    mutated = [apply_attack(data, [SkipStep(n=4, s=128)], seeded_cipher(1), 1, str(i))[0]
               for i, data in enumerate(text_files)]
    # a few scattered encrypted bytes cannot lift prose above near-random media
    assert max(shannon_entropy(m) for m in mutated) < params.entropy_threshold
    assert detection_rate(params, mutated, "entropy") == 0.0
    assert detection_rate(params, mutated, "chi2") == 0.0
