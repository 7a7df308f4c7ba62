import json
import logging
from pathlib import Path
from typing import List

from fastapi import Depends
from sqlalchemy.orm import Session

from app.core.config.database import get_db
from app.domain.model.report import CampaignRun, DetectionRun
from app.domain.schema.attack_schema import CampaignResult
from app.domain.schema.report_schema import DetectionReport
from app.repository.report_repo import ReportRepository
from app.utils.exceptions.exceptions import FavscanError, IntegrityError, ManifestError, NotFoundError

logger = logging.getLogger(__name__)


def load_report_file(path) -> DetectionReport:
    """
    Read a report JSON document written by ``detect``.

    Raises:
        NotFoundError: If the file does not exist.
        ManifestError: If the document is not a valid report.
    """
    path = Path(path)
    if not path.is_file():
        raise NotFoundError(detail=f"Report file {path} not found")
    try:
        return DetectionReport.model_validate_json(path.read_text())
    except ValueError as e:
        raise ManifestError(detail=f"Report file {path} is not a valid detection report", data=str(e))


def write_report_file(report: DetectionReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.model_dump(mode="json"), indent=2))
    return path


class ReportService:
    def __init__(self, db: Session):
        """
        Initialize the ReportService with the database session and repository.

        Args:
            db (Session): SQLAlchemy database session.
        """
        self.db = db
        self.report_repo = ReportRepository(db)

    def save_report(self, report: DetectionReport) -> DetectionRun:
        """
        Store a detection report in the run catalog.

        Args:
            report (DetectionReport): A report, scored or not.

        Returns:
            DetectionRun: The stored row; confusion columns stay null for unscored runs.

        Raises:
            IntegrityError: If the catalog write fails.
        """
        run = DetectionRun(
            e_i=report.e_i,
            e_j=report.e_j,
            prefilter=report.prefilter,
            params=report.params,
            suspicious_files=len(report.suspicious_files),
            wall_seconds=report.wall_seconds,
            timings=report.timings.model_dump(),
            report=report.model_dump(mode="json"),
        )
        for level, matrix in (("block", report.block_level), ("file", report.file_level)):
            if matrix is None:
                continue
            for field in ("tp", "tn", "fp", "fn"):
                setattr(run, f"{level}_{field}", getattr(matrix, field))

        created, err = self.report_repo.create_run(run)
        if err:
            raise IntegrityError(detail="Failed to store detection run", data=str(err))
        logger.info("Stored detection run %s (epochs %d..%d)", created.id, report.e_i, report.e_j)
        return created

    def list_reports(self, limit: int = 50, offset: int = 0) -> List[DetectionRun]:
        runs, err = self.report_repo.list_runs(limit, offset)
        if err:
            raise IntegrityError(detail="Failed to list detection runs", data=str(err))
        return runs

    def get_run(self, run_id: str) -> DetectionRun:
        """
        Fetch one catalog row.

        Raises:
            NotFoundError: If no run has this id.
        """
        run, err = self.report_repo.get_run(run_id)
        if err:
            if isinstance(err, FavscanError):
                raise err
            raise IntegrityError(detail="Failed to read detection run", data=str(err))
        return run

    def get_report(self, run_id: str) -> DetectionReport:
        return DetectionReport.model_validate(self.get_run(run_id).report)

    def save_campaign(self, result: CampaignResult) -> CampaignRun:
        truth = result.ground_truth
        campaign = CampaignRun(
            epoch=result.epoch,
            pattern=result.pattern,
            mode=result.mode.value,
            seed=result.seed,
            encrypted_bytes=truth.encrypted_bytes,
            encrypted_blocks=truth.block_count,
            positive_files=len(truth.positive_files),
            ground_truth=truth.model_dump(mode="json"),
        )
        created, err = self.report_repo.create_campaign(campaign)
        if err:
            raise IntegrityError(detail="Failed to store campaign", data=str(err))
        return created

    def list_campaigns(self, limit: int = 50) -> List[CampaignRun]:
        campaigns, err = self.report_repo.list_campaigns(limit)
        if err:
            raise IntegrityError(detail="Failed to list campaigns", data=str(err))
        return campaigns


def get_report_service(db: Session = Depends(get_db)) -> ReportService:
    return ReportService(db)
