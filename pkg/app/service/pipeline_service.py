import logging
import time
from contextlib import contextmanager
from typing import Iterator, List, Optional

from fastapi import Depends
from pydantic import ValidationError

from app.core.config.env import Settings, get_settings
from app.domain.schema.attack_schema import GroundTruth
from app.domain.schema.fav_schema import FavParams
from app.domain.schema.layout_schema import LayoutManifest
from app.domain.schema.manifest_schema import TrustedManifest
from app.domain.schema.report_schema import ConfusionMatrix, DetectionReport, DetectionRequest, Scores, StageTimings
from app.domain.schema.sawa_schema import SawaParams
from app.service.delta_service import DeltaService
from app.service.fav.dispatcher import FavService
from app.service.manifest_service import ManifestService
from app.service.mapping_service import MappingService
from app.service.peersim_service import load_result
from app.service.sawa_service import SawaService
from app.service.snapstore_service import SnapstoreService
from app.utils.exceptions.exceptions import ArgumentError, FavscanError, PopulationError

logger = logging.getLogger(__name__)


@contextmanager
def stage(name: str, timings: StageTimings) -> Iterator[None]:
    """Time a pipeline stage and attribute any failure to it."""
    started = time.perf_counter()
    try:
        yield
    except FavscanError as e:
        raise e.with_stage(name) from e
    except Exception as e:
        raise FavscanError(detail=f"{type(e).__name__}: {e}", stage=name) from e
    finally:
        setattr(timings, name, getattr(timings, name) + time.perf_counter() - started)


class PipelineService:
    """Delta extraction, SAWA, mapping and format-aware validation over one epoch window."""

    def __init__(self, snapstore: SnapstoreService, settings: Optional[Settings] = None,
                 mapping: Optional[MappingService] = None):
        self.settings = settings or snapstore.settings or get_settings()
        self.snapstore = snapstore
        self.delta = DeltaService(snapstore, self.settings)
        self.sawa = SawaService(self.settings)
        self.mapping = mapping or MappingService(self.settings)
        self.last_delta = None

    def detect(self, e_i: int, e_j: int, layout: LayoutManifest, manifest: Optional[TrustedManifest] = None,
               sawa_params: Optional[SawaParams] = None, fav_params: Optional[FavParams] = None,
               min_gap_length: Optional[int] = None, flag_all: bool = False) -> DetectionReport:
        """
        Run the four stages over epochs e_i..e_j.

        A file is positive when its verdict is Suspicious; a block is positive when
        a suspicious range or a forwarded small delta covers it.

        Raises:
            FavscanError: Any stage failure, with ``stage`` naming the stage.
        """
        timings = StageTimings()
        sawa_params = sawa_params or self.sawa.default_params()
        fav = FavService(self.settings, fav_params)
        min_gap_length = min_gap_length if min_gap_length is not None else self.settings.MIN_GAP_LENGTH
        # wall time covers the stages only
        started = time.perf_counter()

        with stage("delta", timings):
            delta, image = self.delta.extract_with_image(e_i, e_j, min_gap_length)
            self.last_delta = delta
            dirty = delta.dirty_blocks
            block_size, block_count = self.snapstore.geometry()
            population = delta.extent_blocks(block_size, block_count)
        with stage("sawa", timings):
            if flag_all:
                result = self.sawa.flag_all(delta, sawa_params)
            else:
                result = self.sawa.analyze(delta, sawa_params)
        with stage("mapping", timings):
            mapped = self.mapping.map(layout, result.suspicious, result.forwarded_small)
        with stage("fav", timings):
            verdicts = []
            if mapped.regions:
                verdicts = fav.validate_regions(image, layout, mapped.regions, manifest)
        with stage("output", timings):
            report = DetectionReport(
                e_i=e_i,
                e_j=e_j,
                params={
                    "sawa": sawa_params.model_dump(),
                    "fav": fav.params.model_dump(),
                    "min_gap_length": min_gap_length,
                },
                prefilter="flag_all" if flag_all else "sawa",
                dirty_blocks=dirty,
                population_blocks=population,
                positive_blocks=sorted(result.positive_blocks(self.settings.BLOCK_SIZE)),
                delta_blocks=len(delta.deltas),
                changed_bytes=delta.changed_bytes,
                suspicious_ranges=len(result.suspicious),
                forwarded_small=len(result.forwarded_small),
                unmapped=mapped.unmapped,
                verdicts=verdicts,
                file_population=sorted(f.path for f in layout.files),
                timings=timings,
            )
        report.timings = timings
        report.wall_seconds = time.perf_counter() - started
        logger.info("Detect %d..%d: %d delta blocks, %d suspicious ranges, %d of %d files suspicious in %.3fs",
                    e_i, e_j, report.delta_blocks, report.suspicious_ranges, len(report.suspicious_files),
                    len(verdicts), report.wall_seconds)
        return report


def score(report: DetectionReport, ground_truth: GroundTruth) -> Scores:
    """
    Fill the report's confusion matrices from ground truth and return the metrics.

    Raises:
        PopulationError: If the labels do not cover the report's populations.
    """
    population = set(report.population_blocks)
    stray = set(ground_truth.device_blocks) - population
    if stray:
        raise PopulationError(detail=f"{len(stray)} labeled blocks lie outside the dirty extents",
                              data={"blocks": sorted(stray)[:16]})
    labels = ground_truth.file_labels()
    unlabeled = set(report.file_population) - set(labels)
    if unlabeled:
        raise PopulationError(detail=f"{len(unlabeled)} files have no label", data={"files": sorted(unlabeled)[:16]})

    report.block_level = ConfusionMatrix.from_labels(report.positive_blocks, ground_truth.device_blocks, population)
    report.file_level = ConfusionMatrix.from_labels(report.suspicious_files, ground_truth.positive_files,
                                                    report.file_population)
    return report.scores()


def run_request(pipeline: PipelineService, request: DetectionRequest) -> DetectionReport:
    """
    Load the inputs a request names, run detection with its overrides and
    score the report when a campaign result is given.
    """
    s = pipeline.settings
    layout = pipeline.mapping.load_layout(request.layout_path)
    manifest = ManifestService(s).load(request.manifest_path) if request.manifest_path else None
    try:
        sawa_params = SawaParams(
            w=request.sawa_window or s.SAWA_WINDOW,
            s=request.sawa_stride or s.SAWA_STRIDE,
            tau=request.sawa_tau or s.SAWA_TAU,
            shrink=s.SAWA_SHRINK,
        )
        fav_params = FavService(s).params.model_copy(update={
            k: v for k, v in {
                "depth": request.fav_depth,
                "byte_budget": request.fav_byte_budget,
                "gap_limit": request.gap_limit,
                "nlp_heuristic": request.nlp_heuristic,
                "tau": sawa_params.tau,
                "window": sawa_params.w,
            }.items() if v is not None
        })
    except ValidationError as e:
        raise ArgumentError(detail="Invalid detection parameters", data=str(e))

    report = pipeline.detect(request.e_i, request.e_j, layout, manifest, sawa_params, fav_params,
                             request.min_gap_length, request.flag_all)
    if request.ground_truth_path:
        score(report, load_result(request.ground_truth_path).ground_truth)
    return report


def _row(*cells) -> str:
    return " | ".join(str(c) for c in cells)


def render_table(report: DetectionReport, label: str = "") -> str:
    """Plain-text block/file confusion table and per-stage timings."""
    lines: List[str] = [f"Detection report {label}".rstrip() + f" (epochs {report.e_i}..{report.e_j}, "
                        f"prefilter {report.prefilter})"]
    header = _row("Level", "TP", "TN", "FP", "FN", "Accuracy", "Precision", "Recall", "F1")
    lines += [header, "-" * len(header)]
    for name, matrix in (("Block", report.block_level), ("File", report.file_level)):
        if matrix is None:
            continue
        m = matrix.metrics()
        lines.append(_row(name, matrix.tp, matrix.tn, matrix.fp, matrix.fn, f"{m.accuracy:.2%}",
                          f"{m.precision:.2%}", f"{m.recall:.2%}", f"{m.f1:.2%}"))
    if report.block_level is None:
        lines.append(f"(unscored) {len(report.suspicious_files)} suspicious of {len(report.file_population)} files")

    t = report.timings
    lines += ["", _row("Blocks", "Bytes", "Delta", "SAWA", "Mapping", "FAV", "Output"),
              _row(len(report.dirty_blocks), report.changed_bytes, f"{t.delta:.3f}", f"{t.sawa:.3f}",
                   f"{t.mapping:.3f}", f"{t.fav:.3f}", f"{t.output:.3f}")]
    suspicious = [v for v in report.verdicts if v.suspicious]
    if suspicious:
        lines += ["", "Suspicious files:"]
        lines += [f"  {v.path} [{v.format.value}] {', '.join(r.value for r in v.reasons)}" for v in suspicious]
    return "\n".join(lines)


def get_pipeline_service(settings: Settings = Depends(get_settings)) -> PipelineService:
    return PipelineService(SnapstoreService(settings=settings), settings)
