from fastapi import APIRouter
from app.router.endpoints.detection_router import detection_router
from app.router.endpoints.health_router import health_router
from app.router.endpoints.manifest_router import manifest_router
from app.router.endpoints.report_router import report_router
from app.router.endpoints.simulation_router import simulation_router

routers = APIRouter()

routerList = [
    # Health endpoint
    health_router,

    # Detection endpoints
    detection_router,
    report_router,

    # Corpus endpoints
    manifest_router,
    simulation_router,
]

for router in routerList:
    routers.include_router(router)
