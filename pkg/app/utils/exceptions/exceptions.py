from typing import Any, Dict, Optional
from fastapi import HTTPException, status


class FavscanError(HTTPException):
    """Base error for the detection pipeline; carries an HTTP status so the API can return it as-is."""

    status_code_default = status.HTTP_500_INTERNAL_SERVER_ERROR

    def __init__(self, detail: Any = None, data: Any = None, stage: Optional[str] = None,
                 headers: Optional[Dict[str, Any]] = None) -> None:
        self.stage = stage
        # If data or stage is provided, include it in the response detail
        if data is not None or stage is not None:
            if isinstance(detail, dict):
                detail = dict(detail)
            else:
                detail = {"message": detail}
            if data is not None:
                detail["data"] = data
            if stage is not None:
                detail["stage"] = stage
        super().__init__(status_code=self.status_code_default, detail=detail, headers=headers)

    @property
    def message(self) -> str:
        if isinstance(self.detail, dict):
            return str(self.detail.get("message"))
        return str(self.detail)

    def __str__(self) -> str:
        prefix = f"[{self.stage}] " if self.stage else ""
        return f"{prefix}{self.message}"

    def with_stage(self, stage: str) -> "FavscanError":
        """Return a copy of this error attributed to a pipeline stage."""
        data = self.detail.get("data") if isinstance(self.detail, dict) else None
        return type(self)(detail=self.message, data=data, stage=stage)


class ArgumentError(FavscanError):
    status_code_default = status.HTTP_422_UNPROCESSABLE_ENTITY


class RangeError(FavscanError):
    status_code_default = status.HTTP_422_UNPROCESSABLE_ENTITY


class IntegrityError(FavscanError):
    status_code_default = status.HTTP_409_CONFLICT


class ManifestError(FavscanError):
    status_code_default = status.HTTP_422_UNPROCESSABLE_ENTITY


class CapacityError(FavscanError):
    status_code_default = status.HTTP_507_INSUFFICIENT_STORAGE


class LayoutError(FavscanError):
    status_code_default = status.HTTP_409_CONFLICT


class NotFoundError(FavscanError):
    status_code_default = status.HTTP_404_NOT_FOUND


class PopulationError(FavscanError):
    status_code_default = status.HTTP_422_UNPROCESSABLE_ENTITY
