# Export all models for easy access
from .report import CampaignRun, DetectionRun


__all__ = ["DetectionRun", "CampaignRun"]
