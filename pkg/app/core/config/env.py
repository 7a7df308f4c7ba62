from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache


class Settings(BaseSettings):
    STORE_DIR: str = "./favscan-store"
    DATABASE_URL: str = "sqlite:///./favscan.db"
    SENTRY_DSN: str = ""
    LOG_LEVEL: str = "INFO"
    WORKERS: int = 1

    # device geometry
    BLOCK_SIZE: int = 512
    EXTENT_SIZE: int = 4096

    # delta extraction
    MIN_GAP_LENGTH: int = 16

    # sliding adaptive window analysis
    SAWA_WINDOW: int = 16
    SAWA_STRIDE: int = 8
    SAWA_TAU: float = 350.0
    SAWA_SHRINK: str = "bisect"

    # format-aware validation
    FAV_DEPTH: int = 4
    FAV_BYTE_BUDGET: int = 256 * 1024 * 1024
    GAP_LIMIT: int = 64
    NLP_HEURISTIC: bool = False
    MEDIA_EXTENSIONS: str = "jpg,jpeg,png,mp3,mp4"

    # attack simulator
    CLONE_SUFFIX: str = ".enc"

    model_config = SettingsConfigDict(env_file=".env", extra="ignore")

    @property
    def media_extensions(self) -> set[str]:
        return {ext.strip().lower().lstrip(".") for ext in self.MEDIA_EXTENSIONS.split(",") if ext.strip()}


@lru_cache
def get_settings() -> Settings:
    return Settings()
