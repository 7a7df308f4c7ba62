import logging

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app.router.routers import routers
from app.core.config.database import Base, engine
from app.core.config.env import get_settings
from app.core.config.logger import configure_logging


setting = get_settings()
configure_logging(setting)
logger = logging.getLogger(__name__)


class AppCreator():
    def __init__(self):
        self.app = FastAPI(
            title="favscan API",
            description="Snapshot-based detection of partial-encryption ransomware",
            version="1.0.0",
            docs_url="/docs",
            redoc_url="/redoc",
            openapi_url="/openapi.json",
        )

        self.app.add_middleware(
            CORSMiddleware,
            allow_origins=["http://localhost", "http://127.0.0.1"],
            allow_credentials=True,
            allow_methods=["GET", "POST"],
            allow_headers=["*"],
        )

        self.app.include_router(routers)


# Create the run catalog tables
try:
    Base.metadata.create_all(bind=engine)
except Exception as e:
    logger.error("Error creating tables: %s", e)

# Create the app instance
app_creator = AppCreator()
app = app_creator.app
