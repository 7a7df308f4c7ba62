import logging
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Tuple

import numpy as np
from fastapi import Depends

from app.core.config.env import Settings, get_settings
from app.domain.schema.report_schema import BaselineParams
from app.utils.exceptions.exceptions import ArgumentError
from app.utils.helper import normalize_path
from app.utils.stats.chi2 import chi_squared, shannon_entropy

logger = logging.getLogger(__name__)

Method = Literal["entropy", "chi2"]


def chi2_whole_file(file_bytes: bytes) -> float:
    """Chi-squared uniformity statistic over the entire file."""
    return chi_squared(file_bytes)


def tune(clean_files: Iterable[bytes], tuned_on: str = "") -> BaselineParams:
    """
    Most sensitive thresholds that flag none of ``clean_files``.

    Raises:
        ArgumentError: If the clean corpus holds no non-empty file.
    """
    samples = [data for data in clean_files if data]
    if not samples:
        raise ArgumentError(detail="Baseline tuning needs at least one non-empty clean file")
    entropies = [shannon_entropy(d) for d in samples]
    chis = [chi2_whole_file(d) for d in samples]
    return BaselineParams(
        entropy_threshold=float(np.nextafter(max(entropies), np.inf)),
        chi2_threshold=float(np.nextafter(min(chis), -np.inf)),
        tuned_on=tuned_on,
    )


def classify(params: BaselineParams, file_bytes: bytes, method: Method = "entropy") -> bool:
    """True when the file looks encrypted to the chosen detector."""
    if not file_bytes:
        return False
    if method == "entropy":
        return shannon_entropy(file_bytes) > params.entropy_threshold
    return chi2_whole_file(file_bytes) < params.chi2_threshold


def detection_rate(params: BaselineParams, files: Iterable[bytes], method: Method = "entropy") -> float:
    files = list(files)
    if not files:
        return 0.0
    return sum(classify(params, f, method) for f in files) / len(files)


def read_corpus(corpus_dir) -> List[Tuple[str, bytes]]:
    root = Path(corpus_dir)
    if not root.is_dir():
        raise ArgumentError(detail=f"Corpus directory {corpus_dir} does not exist")
    return [(normalize_path(p.relative_to(root).as_posix()), p.read_bytes())
            for p in sorted(root.rglob("*")) if p.is_file()]


class BaselineService:
    """File-level entropy and chi-squared detectors used for comparison."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()

    def tune_corpus(self, clean_dir) -> BaselineParams:
        params = tune((data for _, data in read_corpus(clean_dir)), tuned_on=str(clean_dir))
        logger.info("Tuned baselines on %s: entropy > %.6f, chi2 < %.3f",
                    clean_dir, params.entropy_threshold, params.chi2_threshold)
        return params

    def evaluate(self, params: BaselineParams, eval_dir, method: Method = "entropy") -> Dict[str, bool]:
        """Per-file decision of one detector over a corpus."""
        return {path: classify(params, data, method) for path, data in read_corpus(eval_dir)}


def get_baseline_service(settings: Settings = Depends(get_settings)) -> BaselineService:
    return BaselineService(settings)
