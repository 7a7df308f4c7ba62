from fastapi import APIRouter, Depends, status

from app.domain.schema.report_schema import DetectionRequest
from app.domain.schema.responseSchema import DetectionResponse, ErrorResponse
from app.service.pipeline_service import PipelineService, get_pipeline_service, run_request
from app.service.report_service import ReportService, get_report_service

# Detection router
detection_router = APIRouter(
    prefix="/detections",
    tags=["detection"]
)

@detection_router.post(
    "/",
    response_model=DetectionResponse,
    status_code=status.HTTP_201_CREATED,
    summary="Run detection",
    description="Run delta extraction, SAWA, mapping and format-aware validation over an epoch window.",
    responses={
        status.HTTP_409_CONFLICT: {"model": ErrorResponse, "description": "Broken replay chain or layout conflict"},
        status.HTTP_422_UNPROCESSABLE_ENTITY: {"model": ErrorResponse, "description": "Bad epochs or parameters"},
    },
)
def run_detection(
    request: DetectionRequest,
    pipeline: PipelineService = Depends(get_pipeline_service),
    report_service: ReportService = Depends(get_report_service)
):
    """
    Run the detection pipeline over the configured snapshot store.

    - **e_i**, **e_j**: Epoch window, inclusive
    - **layout_path**: Layout manifest mapping files to device extents
    - **manifest_path**: Optional trusted manifest for media and opaque components
    - **ground_truth_path**: Optional campaign result; the report is scored against it
    - **save**: Store the report in the run catalog

    Stage failures return their error status with the failing stage in the detail.
    """
    report = run_request(pipeline, request)
    run_id = report_service.save_report(report).id if request.save else None
    return {
        "detail": f"Detection completed: {len(report.suspicious_files)} suspicious files",
        "run_id": run_id,
        "data": report,
    }
