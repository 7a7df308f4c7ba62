from fastapi import APIRouter, Depends, Query, status

from app.domain.model.report import DetectionRun
from app.domain.schema.report_schema import ConfusionMatrix
from app.domain.schema.responseSchema import ReportDetailResponse, ReportListResponse
from app.service.report_service import ReportService, get_report_service

# Report router
report_router = APIRouter(
    prefix="/reports",
    tags=["report"]
)


def _metrics(run: DetectionRun, level: str):
    counts = [getattr(run, f"{level}_{k}") for k in ("tp", "tn", "fp", "fn")]
    if any(c is None for c in counts):
        return None
    return ConfusionMatrix(tp=counts[0], tn=counts[1], fp=counts[2], fn=counts[3]).metrics()


@report_router.get(
    "/",
    response_model=ReportListResponse,
    status_code=status.HTTP_200_OK,
    summary="List detection runs",
    description="Retrieve stored detection runs, newest first.",
)
async def list_reports(
    limit: int = Query(50, ge=1, le=500),
    offset: int = Query(0, ge=0),
    report_service: ReportService = Depends(get_report_service)
):
    """
    Retrieve a page of the run catalog.

    - **limit**: Number of runs per page (default: 50, max: 500)
    - **offset**: Runs to skip
    """
    runs = report_service.list_reports(limit, offset)
    return {
        "detail": "Reports fetched successfully",
        "data": [
            {
                "id": run.id,
                "created_at": run.created_at,
                "e_i": run.e_i,
                "e_j": run.e_j,
                "prefilter": run.prefilter,
                "suspicious_files": run.suspicious_files,
                "wall_seconds": run.wall_seconds,
                "block_level": _metrics(run, "block"),
                "file_level": _metrics(run, "file"),
            }
            for run in runs
        ],
        "pagination": {"limit": limit, "offset": offset, "count": len(runs)},
    }


@report_router.get(
    "/{run_id}",
    response_model=ReportDetailResponse,
    status_code=status.HTTP_200_OK,
    summary="Get a detection report",
    description="Retrieve the full report of one stored run.",
)
async def get_report(
    run_id: str,
    report_service: ReportService = Depends(get_report_service)
):
    """
    Retrieve one stored report.

    - **run_id**: Catalog id returned when the run was saved
    """
    return {
        "detail": "Report fetched successfully",
        "run_id": run_id,
        "data": report_service.get_report(run_id),
    }
