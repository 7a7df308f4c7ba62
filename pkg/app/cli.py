import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click

from app.core.config.env import Settings, get_settings
from app.core.config.logger import configure_logging
from app.domain.schema.attack_schema import CampaignMode, CampaignRequest
from app.domain.schema.manifest_schema import TrustedManifest
from app.domain.schema.report_schema import DetectionRequest
from app.utils.exceptions.exceptions import FavscanError

logger = logging.getLogger(__name__)

EXIT_CLEAN = 0
EXIT_ERROR = 1
EXIT_DETECTIONS = 2


class FavscanGroup(click.Group):
    """Maps pipeline errors to exit code 1 with the message on stderr."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except FavscanError as e:
            click.echo(f"error: {e}", err=True)
            ctx.exit(EXIT_ERROR)


def _settings(ctx: click.Context) -> Settings:
    return ctx.obj["settings"]


def _catalog():
    from app.core.config.database import Base, SessionLocal, engine
    from app.service.report_service import ReportService

    Base.metadata.create_all(bind=engine)
    return ReportService(SessionLocal())


def _write_json(payload, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, default=str)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        click.echo(text)


@click.group(cls=FavscanGroup)
@click.option("--store", "store_dir", type=click.Path(file_okay=False), help="Snapshot store directory.")
@click.option("--workers", type=int, help="Worker threads for delta extraction and validation.")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.pass_context
def cli(ctx: click.Context, store_dir: Optional[str], workers: Optional[int], log_level: Optional[str]):
    """Snapshot-based detection of partial-encryption ransomware."""
    updates = {"STORE_DIR": store_dir, "WORKERS": workers, "LOG_LEVEL": log_level}
    settings = get_settings().model_copy(update={k: v for k, v in updates.items() if v is not None})
    configure_logging(settings)
    ctx.ensure_object(dict)
    ctx.obj["settings"] = settings


@cli.command()
@click.option("--blocks", type=click.IntRange(min=1), required=True, help="Device size in 512-byte blocks.")
@click.pass_context
def init(ctx: click.Context, blocks: int):
    """Create a snapshot store over an all-zero device (epoch 0)."""
    from app.service.peersim_service import PeersimService
    from app.service.snapstore_service import SnapstoreService

    settings = _settings(ctx)
    meta = PeersimService(SnapstoreService(settings=settings), settings=settings).init_device(blocks)
    click.echo(json.dumps(meta, indent=2, default=str))


@cli.command()
@click.option("--layout", "layout_path", type=click.Path(dir_okay=False), required=True,
              help="Layout manifest, created by --corpus when missing.")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True, file_okay=False),
              help="Copy every file under this directory onto the device as one epoch first.")
@click.option("--reserved-extents", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--pattern", help="fast:N | skip:N,S | animagus:F | blackbasta, joined with '+'.")
@click.option("--layout-out", type=click.Path(dir_okay=False), help="Write the extended layout here instead.")
@click.option("--result", "result_path", type=click.Path(dir_okay=False), help="Campaign result with ground truth.")
@click.option("--mode", type=click.Choice([m.value for m in CampaignMode]), default=CampaignMode.CLONE.value,
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--key-hex", help="AES-256 key as 64 hex characters; derived from the seed when omitted.")
@click.option("--target", "targets", multiple=True, help="Attack only these layout paths.")
@click.option("--save", is_flag=True, help="Record the campaign in the run catalog.")
@click.pass_context
def simulate(ctx: click.Context, layout_path: str, corpus_dir: Optional[str], reserved_extents: int,
             pattern: Optional[str], layout_out: Optional[str], result_path: Optional[str], mode: str, seed: int,
             key_hex: Optional[str], targets, save: bool):
    """Write a corpus onto the device and/or encrypt files with a partial-encryption pattern."""
    from app.service.mapping_service import MappingService
    from app.service.peersim_service import PeersimService
    from app.service.snapstore_service import SnapstoreService

    if not corpus_dir and not pattern:
        raise click.UsageError("Give --corpus, --pattern or both")
    settings = _settings(ctx)
    mapping = MappingService(settings)
    peersim = PeersimService(SnapstoreService(settings=settings), mapping, settings)

    if corpus_dir:
        layout = mapping.load_layout(layout_path) if Path(layout_path).exists() else None
        layout, epoch = peersim.write_corpus(corpus_dir, layout, reserved_extents)
        mapping.save_layout(layout, layout_path)
        click.echo(f"epoch {epoch}: {len(layout.files)} files in layout {layout_path}")
    if not pattern:
        return

    request = CampaignRequest(pattern=pattern, key_hex=key_hex, seed=seed, mode=CampaignMode(mode),
                              layout_path=layout_path, targets=list(targets) or None, layout_out=layout_out,
                              result_path=result_path)
    result = peersim.simulate(request)
    if save:
        _catalog().save_campaign(result)
    truth = result.ground_truth
    click.echo(f"epoch {result.epoch}: {result.pattern} ({result.mode.value}) encrypted "
               f"{truth.encrypted_bytes} bytes in {len(truth.positive_files)} files")


@cli.command()
@click.option("--from-epoch", "e_i", type=click.IntRange(min=1), required=True)
@click.option("--to-epoch", "e_j", type=click.IntRange(min=1), required=True)
@click.option("--layout", "layout_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--ground-truth", "ground_truth_path", type=click.Path(exists=True, dir_okay=False),
              help="Campaign result to score the run against.")
@click.option("--sawa-window", type=click.IntRange(min=1))
@click.option("--sawa-stride", type=click.IntRange(min=1))
@click.option("--sawa-tau", type=click.FloatRange(min=0, min_open=True))
@click.option("--fav-depth", type=click.IntRange(min=0))
@click.option("--fav-byte-budget", type=click.IntRange(min=0))
@click.option("--gap-limit", type=click.IntRange(min=0))
@click.option("--nlp-heuristic/--no-nlp-heuristic", default=None)
@click.option("--min-gap-length", type=click.IntRange(min=1))
@click.option("--flag-all", is_flag=True, help="Replace SAWA with flagging every delta byte.")
@click.option("--dump-delta", type=click.Path(dir_okay=False), help="Write the delta snapshot as JSON.")
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="json", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Write the JSON report here.")
@click.option("--save", is_flag=True, help="Store the report in the run catalog.")
@click.pass_context
def detect(ctx: click.Context, fmt: str, out: Optional[str], dump_delta: Optional[str], **options):
    """Run the detection pipeline over an epoch window. Exit code 2 means detections."""
    from app.service.delta_service import dump_json
    from app.service.pipeline_service import PipelineService, render_table, run_request
    from app.service.report_service import write_report_file
    from app.service.snapstore_service import SnapstoreService

    settings = _settings(ctx)
    try:
        request = DetectionRequest(**options)
    except ValueError as e:
        raise click.BadParameter(str(e))
    pipeline = PipelineService(SnapstoreService(settings=settings), settings)
    report = run_request(pipeline, request)

    if dump_delta and pipeline.last_delta is not None:
        _write_json(dump_json(pipeline.last_delta), dump_delta)
    if out:
        write_report_file(report, out)
    if request.save:
        run = _catalog().save_report(report)
        click.echo(f"saved run {run.id}", err=True)
    if fmt == "table":
        click.echo(render_table(report))
    elif not out:
        click.echo(report.model_dump_json(indent=2))
    ctx.exit(EXIT_DETECTIONS if report.has_detections else EXIT_CLEAN)


@cli.command()
@click.option("--method", type=click.Choice(["entropy", "chi2"]), default="entropy", show_default=True)
@click.option("--tune", "tune_dir", type=click.Path(exists=True, file_okay=False), required=True,
              help="Clean corpus the thresholds are tuned on.")
@click.option("--eval", "eval_dir", type=click.Path(exists=True, file_okay=False), help="Corpus to classify.")
@click.pass_context
def baseline(ctx: click.Context, method: str, tune_dir: str, eval_dir: Optional[str]):
    """Tune a file-level entropy or chi-squared detector and classify a corpus."""
    from app.service.baseline_service import BaselineService

    service = BaselineService(_settings(ctx))
    params = service.tune_corpus(tune_dir)
    payload = {"params": params.model_dump(), "method": method}
    if eval_dir:
        decisions = service.evaluate(params, eval_dir, method)
        payload["flagged"] = sorted(path for path, hit in decisions.items() if hit)
        payload["total"] = len(decisions)
    click.echo(json.dumps(payload, indent=2))


@cli.group(cls=FavscanGroup)
def report():
    """Read stored detection reports."""


@report.command("list")
@click.option("--limit", type=click.IntRange(min=1), default=20, show_default=True)
def report_list(limit: int):
    runs = _catalog().list_reports(limit)
    for run in runs:
        click.echo(f"{run.id}  {run.created_at}  epochs {run.e_i}..{run.e_j}  "
                   f"{run.suspicious_files} suspicious  {run.wall_seconds:.3f}s")


@report.command("show")
@click.argument("run_id")
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="table", show_default=True)
def report_show(run_id: str, fmt: str):
    """Print one stored report."""
    from app.service.pipeline_service import render_table

    stored = _catalog().get_report(run_id)
    click.echo(render_table(stored, run_id) if fmt == "table" else stored.model_dump_json(indent=2))


@report.command("render")
@click.argument("path", type=click.Path(dir_okay=False))
def report_render(path: str):
    """Render a report JSON file as a confusion and timing table."""
    from app.service.pipeline_service import render_table
    from app.service.report_service import load_report_file

    click.echo(render_table(load_report_file(path), Path(path).name))


@cli.group(cls=FavscanGroup)
def manifest():
    """Build trusted manifests."""


@manifest.command("build")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--out", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def manifest_build(ctx: click.Context, corpus_dir: str, out: str):
    """Hash media files and opaque components under CORPUS_DIR."""
    from app.service.manifest_service import ManifestService

    service = ManifestService(_settings(ctx))
    built: TrustedManifest = service.build(corpus_dir)
    service.save(built, out)
    click.echo(f"{len(built.file_hashes)} files, {len(built.component_hashes)} components -> {out}")


@cli.group(cls=FavscanGroup)
def corpus():
    """Generate synthetic corpora."""


@corpus.command("build")
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--format", "formats", multiple=True, help="Formats to generate; documents and media by default.")
@click.option("--count", type=click.IntRange(min=1), default=10, show_default=True, help="Files per format.")
@click.option("--seed", type=int, default=0, show_default=True)
def corpus_build(out_dir: str, formats, count: int, seed: int):
    from app.utils.corpus import MIXED_FORMATS, build_corpus

    try:
        written = build_corpus(out_dir, {fmt: count for fmt in (formats or MIXED_FORMATS)}, seed)
    except ValueError as e:
        raise click.BadParameter(str(e))
    click.echo(f"{len(written)} files written under {out_dir}")


@cli.group(cls=FavscanGroup)
def experiment():
    """Evaluation protocols over synthetic corpora."""


@experiment.command("protocol")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--pattern", required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def experiment_protocol(ctx: click.Context, corpus_dir: str, pattern: str, seed: int):
    """10 attacked originals, 2 untouched extras and their clones, detected and scored."""
    from app.service.experiment_service import ExperimentService
    from app.service.peersim_service import parse_pattern
    from app.service.pipeline_service import render_table

    run = ExperimentService(_settings(ctx)).clone_protocol(corpus_dir, parse_pattern(pattern), seed)
    click.echo(render_table(run.report, run.pattern))


@experiment.command("sweep")
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--n", "n_values", type=click.IntRange(min=1), multiple=True)
@click.option("--skip", type=click.IntRange(min=0), default=128, show_default=True)
@click.option("--baselines", is_flag=True, help="Compare with tuned entropy and chi-squared detectors.")
@click.option("--shared-tuning", is_flag=True, help="Tune one baseline threshold pair over all formats.")
@click.pass_context
def experiment_sweep(ctx: click.Context, corpus_dir: str, n_values, skip: int, baselines: bool, shared_tuning: bool):
    """Detection rate per format under SkipStep(n, skip)."""
    from app.service.experiment_service import (
        SWEEP_N_VALUES,
        ExperimentService,
        render_comparison,
        render_sweep,
    )

    service = ExperimentService(_settings(ctx))
    n_values = n_values or SWEEP_N_VALUES
    if baselines:
        rows = service.baseline_comparison(corpus_dir, n_values, skip, per_format=not shared_tuning)
        click.echo(render_comparison(rows))
    else:
        click.echo(render_sweep(service.granularity_sweep(corpus_dir, n_values, skip)))


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int):
    """Serve the HTTP API."""
    import uvicorn

    uvicorn.run("app.main:app", host=host, port=port)


def main() -> None:
    sys.exit(cli(obj={}))


if __name__ == "__main__":
    main()
