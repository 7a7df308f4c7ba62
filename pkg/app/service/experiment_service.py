import logging
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from fastapi import Depends

from app.core.config.env import Settings, get_settings
from app.domain.schema.attack_schema import CampaignMode, CipherSpec, SkipStep
from app.domain.schema.fav_schema import FavParams
from app.domain.schema.manifest_schema import TrustedManifest
from app.domain.schema.report_schema import BaselineComparison, ProtocolRun, SweepPoint
from app.service.baseline_service import classify, read_corpus, tune
from app.service.fav.dispatcher import FavService, detect_format
from app.service.fav.zip_container import extension
from app.service.manifest_service import build_manifest
from app.service.mapping_service import MappingService
from app.service.peersim_service import PeersimService, Schedule, apply_attack, schedule_label, seeded_cipher
from app.service.pipeline_service import PipelineService, score
from app.service.snapstore_service import SnapstoreService
from app.utils.exceptions.exceptions import ArgumentError

logger = logging.getLogger(__name__)

SWEEP_N_VALUES = (4, 8, 16, 64, 128, 256, 512)
SWEEP_SKIP = 128


def interleave_formats(files: List[Tuple[str, bytes]]) -> List[Tuple[str, bytes]]:
    """Round-robin over file extensions so a short prefix mixes formats."""
    groups: Dict[str, List[Tuple[str, bytes]]] = {}
    for rel, data in files:
        groups.setdefault(extension(rel), []).append((rel, data))
    ordered = []
    queues = [groups[ext] for ext in sorted(groups)]
    for index in range(max((len(q) for q in queues), default=0)):
        ordered += [q[index] for q in queues if index < len(q)]
    return ordered


class ExperimentService:
    """Evaluation protocols: the clone-campaign confusion tables, the granularity sweep and the baselines."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        self.fav = FavService(self.settings)

    def manifest_for(self, corpus_dir) -> TrustedManifest:
        s = self.settings
        return build_manifest(corpus_dir, s.media_extensions, s.FAV_DEPTH, s.FAV_BYTE_BUDGET)

    def clone_protocol(self, corpus_dir, schedule: Schedule, seed: int = 0, cipher: Optional[CipherSpec] = None,
                        originals: int = 10, extras: int = 2, store_dir=None) -> ProtocolRun:
        """
        Copy ``originals + extras`` corpus files onto a fresh device as epoch 1,
        write encrypted clones of the originals as epoch 2, detect over [1, 2]
        and score against the campaign's ground truth.

        Raises:
            ArgumentError: If the corpus holds fewer files than the protocol needs.
        """
        files = read_corpus(corpus_dir)
        needed = originals + extras
        if len(files) < needed:
            raise ArgumentError(detail=f"Protocol needs {needed} files, corpus has {len(files)}")
        chosen = interleave_formats(files)[:needed]
        cipher = cipher or seeded_cipher(seed)

        with tempfile.TemporaryDirectory(prefix="favscan-protocol-") as work:
            work = Path(work)
            staging = work / "corpus"
            for rel, data in chosen:
                target = staging / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_bytes(data)

            snapstore = SnapstoreService(str(store_dir or work / "store"), self.settings)
            mapping = MappingService(self.settings)
            peersim = PeersimService(snapstore, mapping, self.settings)
            peersim.init_device(self._device_blocks(data for _, data in chosen))
            layout, first = peersim.write_corpus(staging)
            manifest = self.manifest_for(staging)

            targets = [rel for rel, _ in chosen[:originals]]
            campaign = peersim.run_campaign(layout, schedule, cipher, seed, CampaignMode.CLONE, targets)
            pipeline = PipelineService(snapstore, self.settings, mapping)
            report = pipeline.detect(first, campaign.epoch, campaign.layout, manifest)
            scores = score(report, campaign.ground_truth)

        logger.info("Protocol %s: file-level F1 %.3f, block-level recall %.3f",
                    schedule_label(schedule), scores.file_level.f1, scores.block_level.recall)
        return ProtocolRun(pattern=schedule_label(schedule), originals=targets,
                           extras=[rel for rel, _ in chosen[originals:]], report=report, scores=scores)

    def _device_blocks(self, payloads: Iterable[bytes]) -> int:
        extent = self.settings.EXTENT_SIZE
        extents = sum(-(-len(p) // extent) for p in payloads)
        # originals, clones and some free space
        return (2 * extents + 8) * extent // self.settings.BLOCK_SIZE

    def granularity_sweep(self, corpus_dir, n_values: Iterable[int] = SWEEP_N_VALUES, skip: int = SWEEP_SKIP,
                          seed: int = 0, manifest: Optional[TrustedManifest] = None,
                          params: Optional[FavParams] = None) -> List[SweepPoint]:
        """
        Per-format FAV detection rate under SkipStep(n, skip), validating the
        whole encrypted file so the prefilter plays no part.
        """
        files = read_corpus(corpus_dir)
        manifest = manifest if manifest is not None else self.manifest_for(corpus_dir)
        params = params or self.fav.params
        cipher = seeded_cipher(seed)
        points: List[SweepPoint] = []
        for n in n_values:
            detected: Dict[str, int] = {}
            totals: Dict[str, int] = {}
            for rel, data in files:
                fmt = detect_format(rel, data, params).value
                mutated, _ = apply_attack(data, [SkipStep(n=n, s=skip)], cipher, seed, rel,
                                          self.settings.BLOCK_SIZE)
                verdict = self.fav.dispatch(rel, mutated, [(0, len(mutated))], manifest)
                totals[fmt] = totals.get(fmt, 0) + 1
                detected[fmt] = detected.get(fmt, 0) + int(verdict.suspicious)
            points += [SweepPoint(format=fmt, n=n, detected=detected[fmt], total=totals[fmt]) for fmt in sorted(totals)]
            logger.info("Sweep skip:%d,%d: %s", n, skip, {fmt: f"{detected[fmt]}/{totals[fmt]}" for fmt in totals})
        return points

    def baseline_comparison(self, clean_dir, n_values: Iterable[int] = SWEEP_N_VALUES, skip: int = SWEEP_SKIP,
                            seed: int = 0, per_format: bool = True) -> List[BaselineComparison]:
        """
        Entropy and chi-squared detectors tuned on ``clean_dir`` against FAV on
        the same files encrypted with SkipStep(n, skip).

        With ``per_format`` each format gets thresholds tuned on its own clean
        files; otherwise one pair of thresholds covers the whole corpus.
        """
        files = read_corpus(clean_dir)
        manifest = self.manifest_for(clean_dir)
        params = self.fav.params
        cipher = seeded_cipher(seed)
        formats = {rel: detect_format(rel, data, params).value for rel, data in files}
        if per_format:
            grouped: Dict[str, List[bytes]] = {}
            for rel, data in files:
                grouped.setdefault(formats[rel], []).append(data)
            tuned = {fmt: tune(samples, tuned_on=f"{clean_dir}:{fmt}") for fmt, samples in grouped.items()}
            baselines = {rel: tuned[formats[rel]] for rel, _ in files}
        else:
            shared = tune((data for _, data in files), tuned_on=str(clean_dir))
            baselines = {rel: shared for rel, _ in files}

        clean_fp = {
            "fav": sum(self.fav.dispatch(rel, data, [(0, len(data))], manifest).suspicious for rel, data in files),
            "entropy": sum(classify(baselines[rel], data, "entropy") for rel, data in files),
            "chi2": sum(classify(baselines[rel], data, "chi2") for rel, data in files),
        }
        rows: List[BaselineComparison] = []
        for n in n_values:
            counts: Dict[str, Dict[str, int]] = {}
            for rel, data in files:
                mutated, _ = apply_attack(data, [SkipStep(n=n, s=skip)], cipher, seed, rel,
                                          self.settings.BLOCK_SIZE)
                row = counts.setdefault(formats[rel], {"total": 0, "fav": 0, "entropy": 0, "chi2": 0})
                row["total"] += 1
                row["fav"] += int(self.fav.dispatch(rel, mutated, [(0, len(mutated))], manifest).suspicious)
                row["entropy"] += int(classify(baselines[rel], mutated, "entropy"))
                row["chi2"] += int(classify(baselines[rel], mutated, "chi2"))
            rows += [BaselineComparison(format=fmt, n=n, clean_fp=clean_fp, **counts[fmt]) for fmt in sorted(counts)]
        return rows


def render_sweep(points: List[SweepPoint]) -> str:
    formats = sorted({p.format for p in points})
    ns = sorted({p.n for p in points})
    rate = {(p.format, p.n): p.rate for p in points}
    lines = [" | ".join(["n"] + formats)]
    for n in ns:
        lines.append(" | ".join([str(n)] + [f"{rate.get((fmt, n), 0.0):.2%}" for fmt in formats]))
    return "\n".join(lines)


def render_comparison(rows: List[BaselineComparison]) -> str:
    lines = [" | ".join(["Format", "n", "Files", "FAV", "Entropy", "Chi2"])]
    for r in rows:
        lines.append(" | ".join([r.format, str(r.n), str(r.total), str(r.fav), str(r.entropy), str(r.chi2)]))
    if rows:
        lines.append(f"Clean false positives: {rows[0].clean_fp}")
    return "\n".join(lines)


def get_experiment_service(settings: Settings = Depends(get_settings)) -> ExperimentService:
    return ExperimentService(settings)
