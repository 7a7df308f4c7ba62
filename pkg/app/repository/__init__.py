from app.repository.snapshot_repo import SnapshotRepository
from app.repository.layout_repo import LayoutRepository
from app.repository.manifest_repo import ManifestRepository
from app.repository.report_repo import ReportRepository

__all__ = [
    'SnapshotRepository',
    'LayoutRepository',
    'ManifestRepository',
    'ReportRepository'
]
