from pydantic import BaseModel, Field
from typing import Optional, Dict, Any, List
from datetime import datetime

from app.domain.schema.report_schema import DetectionReport, Metrics


# Base response model
class BaseResponse(BaseModel):
    """Base response model with a detail message"""
    detail: str = Field(
        ...,
        description="Response message",
        examples=["Operation successful"]
    )

# Error response model
class ErrorResponse(BaseModel):
    """Error response model"""
    detail: Any = Field(
        ...,
        description="Error message, with data and the failing stage when known",
        examples=[{"message": "Epoch 3 is missing from the store", "stage": "delta"}]
    )

class HealthResponse(BaseResponse):
    """Service and store status"""
    store_dir: str = Field(..., description="Snapshot store in use")
    latest_epoch: Optional[int] = Field(None, description="Newest recorded epoch, null when the store is empty")

    model_config = {
        "json_schema_extra": {
            "example": {
                "detail": "ok",
                "store_dir": "./favscan-store",
                "latest_epoch": 2
            }
        }
    }

class RunSummary(BaseModel):
    """One detection run in the catalog"""
    id: str
    created_at: Optional[datetime] = None
    e_i: int
    e_j: int
    prefilter: str
    suspicious_files: int
    wall_seconds: float
    block_level: Optional[Metrics] = None
    file_level: Optional[Metrics] = None

class DetectionResponse(BaseResponse):
    """Detection run response model"""
    run_id: Optional[str] = Field(None, description="Catalog id when the run was saved")
    data: DetectionReport

    model_config = {
        "json_schema_extra": {
            "example": {
                "detail": "Detection completed: 10 suspicious files",
                "run_id": "123e4567-e89b-12d3-a456-426614174000",
                "data": {"e_i": 1, "e_j": 2, "prefilter": "sawa", "verdicts": []}
            }
        }
    }

class ReportListResponse(BaseResponse):
    """Run catalog page"""
    data: List[RunSummary]
    pagination: Dict[str, int]

    model_config = {
        "json_schema_extra": {
            "example": {
                "detail": "Reports fetched successfully",
                "data": [],
                "pagination": {"limit": 50, "offset": 0, "count": 0}
            }
        }
    }

class ReportDetailResponse(BaseResponse):
    run_id: str
    data: DetectionReport

class ManifestBuildResponse(BaseResponse):
    """Trusted manifest build response model"""
    data: Dict[str, Any] = Field(..., description="Output path and entry counts")

    model_config = {
        "json_schema_extra": {
            "example": {
                "detail": "Manifest built successfully",
                "data": {"path": "manifest.json", "files": 12, "components": 30, "skipped": 0}
            }
        }
    }

class SimulationResponse(BaseResponse):
    """Campaign response model"""
    data: Dict[str, Any] = Field(..., description="Epoch, pattern and ground-truth totals")

    model_config = {
        "json_schema_extra": {
            "example": {
                "detail": "Campaign recorded as epoch 2",
                "data": {"epoch": 2, "pattern": "skip:64,128", "positive_files": 10, "encrypted_bytes": 81920,
                         "encrypted_blocks": 160}
            }
        }
    }
