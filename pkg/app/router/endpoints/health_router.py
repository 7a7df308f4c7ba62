from fastapi import APIRouter, Depends, status

from app.core.config.env import Settings, get_settings
from app.domain.schema.responseSchema import HealthResponse
from app.service.snapstore_service import SnapstoreService
from app.utils.exceptions.exceptions import FavscanError

# Health router
health_router = APIRouter(
    prefix="/health",
    tags=["health"]
)

@health_router.get(
    "",
    response_model=HealthResponse,
    status_code=status.HTTP_200_OK,
    summary="Health check",
)
async def health(settings: Settings = Depends(get_settings)):
    """Report the snapshot store in use and its newest epoch."""
    store = SnapstoreService(settings=settings)
    try:
        store.geometry()
        latest = store.latest_epoch()
    except FavscanError:
        latest = None
    return {"detail": "ok", "store_dir": settings.STORE_DIR, "latest_epoch": latest}
