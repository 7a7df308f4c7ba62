import uuid

from sqlalchemy import JSON, Column, DateTime, Float, Integer, String
from sqlalchemy.orm import Mapped, mapped_column
from sqlalchemy.sql import func

from app.core.config.database import Base


def _uuid() -> str:
    return str(uuid.uuid4())


class DetectionRun(Base):
    __tablename__ = "detection_runs"
    id: Mapped[str] = mapped_column(String(36), primary_key=True, default=_uuid, index=True)
    created_at = Column(DateTime(timezone=True), server_default=func.now())
    e_i = Column(Integer, nullable=False)
    e_j = Column(Integer, nullable=False)
    prefilter = Column(String, default="sawa")
    params = Column(JSON, default=dict)

    # confusion counts, null when the run was not scored
    block_tp = Column(Integer)
    block_tn = Column(Integer)
    block_fp = Column(Integer)
    block_fn = Column(Integer)
    file_tp = Column(Integer)
    file_tn = Column(Integer)
    file_fp = Column(Integer)
    file_fn = Column(Integer)

    suspicious_files = Column(Integer, default=0)
    wall_seconds = Column(Float, default=0.0)
    timings = Column(JSON, default=dict)
    report = Column(JSON, nullable=False)


class CampaignRun(Base):
    __tablename__ = "campaign_runs"
    id: Mapped[str] = mapped_column(String(36), primary_key=True, default=_uuid, index=True)
    created_at = Column(DateTime(timezone=True), server_default=func.now())
    epoch = Column(Integer, nullable=False)
    pattern = Column(String, nullable=False)
    mode = Column(String, default="clone")
    seed = Column(Integer, default=0)
    encrypted_bytes = Column(Integer, default=0)
    encrypted_blocks = Column(Integer, default=0)
    positive_files = Column(Integer, default=0)
    ground_truth = Column(JSON, nullable=False)
