from fastapi import APIRouter, Depends, status

from app.domain.schema.attack_schema import CampaignRequest
from app.domain.schema.responseSchema import SimulationResponse
from app.service.peersim_service import PeersimService, get_peersim_service
from app.service.report_service import ReportService, get_report_service

# Simulation router
simulation_router = APIRouter(
    prefix="/simulations",
    tags=["simulation"]
)

@simulation_router.post(
    "/",
    response_model=SimulationResponse,
    status_code=status.HTTP_201_CREATED,
    summary="Run an attack campaign",
    description="Encrypt files on the simulated device with a partial-encryption pattern and record one epoch.",
)
def run_simulation(
    request: CampaignRequest,
    peersim: PeersimService = Depends(get_peersim_service),
    report_service: ReportService = Depends(get_report_service)
):
    """
    Run a campaign against the files of a layout.

    - **pattern**: fast:N, skip:N,S, animagus:F or blackbasta; join several with '+'
    - **mode**: clone (write .enc copies) or inplace (overwrite originals)
    - **layout_path**: Layout of the files on the device; the extended layout is written back
    - **result_path**: Optional path for the campaign result with ground truth
    """
    result = peersim.simulate(request)
    report_service.save_campaign(result)
    truth = result.ground_truth
    return {
        "detail": f"Campaign recorded as epoch {result.epoch}",
        "data": {
            "epoch": result.epoch,
            "pattern": result.pattern,
            "positive_files": len(truth.positive_files),
            "encrypted_bytes": truth.encrypted_bytes,
            "encrypted_blocks": truth.block_count,
        },
    }
