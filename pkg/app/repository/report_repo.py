from typing import Any, Tuple

from sqlalchemy.orm import Session

from app.domain.model.report import CampaignRun, DetectionRun
from app.utils.exceptions.exceptions import NotFoundError


def _wrap_return(result: Any) -> Tuple[Any, None]:
    return result, None
def _wrap_error(e: Exception) -> Tuple[None, Exception]:
    return None, e


class ReportRepository:
    """
    Repository class for the detection run catalog.
    """

    def __init__(self, db: Session):
        """
        Initialize the ReportRepository.

        Args:
            db (Session): The database session.
        """
        self.db = db

    def create_run(self, run: DetectionRun):
        """
        Store a detection run.

        Args:
            run (DetectionRun): The run row to insert.

        Returns:
            DetectionRun: The stored row.
        """
        try:
            self.db.add(run)
            self.db.commit()
            self.db.refresh(run)
            return _wrap_return(run)
        except Exception as e:
            self.db.rollback()
            return _wrap_error(e)

    def get_run(self, run_id: str):
        try:
            run = self.db.query(DetectionRun).filter(DetectionRun.id == run_id).first()
            if not run:
                return None, NotFoundError(detail=f"Detection run {run_id} not found")
            return _wrap_return(run)
        except Exception as e:
            return _wrap_error(e)

    def list_runs(self, limit: int = 50, offset: int = 0):
        """
        List detection runs, newest first.

        Returns:
            List[DetectionRun]: One page of runs.
        """
        try:
            runs = (
                self.db.query(DetectionRun)
                .order_by(DetectionRun.created_at.desc(), DetectionRun.id)
                .offset(offset)
                .limit(limit)
                .all()
            )
            return _wrap_return(runs)
        except Exception as e:
            return _wrap_error(e)

    def create_campaign(self, campaign: CampaignRun):
        try:
            self.db.add(campaign)
            self.db.commit()
            self.db.refresh(campaign)
            return _wrap_return(campaign)
        except Exception as e:
            self.db.rollback()
            return _wrap_error(e)

    def list_campaigns(self, limit: int = 50):
        try:
            return _wrap_return(
                self.db.query(CampaignRun).order_by(CampaignRun.created_at.desc()).limit(limit).all()
            )
        except Exception as e:
            return _wrap_error(e)
