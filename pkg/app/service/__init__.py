from .snapstore_service import SnapstoreService, get_snapstore_service
from .delta_service import DeltaService, get_delta_service
from .sawa_service import SawaService, get_sawa_service
from .mapping_service import MappingService, get_mapping_service
from .manifest_service import ManifestService, get_manifest_service
from .peersim_service import PeersimService, get_peersim_service
from .baseline_service import BaselineService, get_baseline_service
from .pipeline_service import PipelineService, get_pipeline_service
from .report_service import ReportService, get_report_service
from .experiment_service import ExperimentService, get_experiment_service

__all__ = [
    'SnapstoreService', 'get_snapstore_service',
    'DeltaService', 'get_delta_service',
    'SawaService', 'get_sawa_service',
    'MappingService', 'get_mapping_service',
    'ManifestService', 'get_manifest_service',
    'PeersimService', 'get_peersim_service',
    'BaselineService', 'get_baseline_service',
    'PipelineService', 'get_pipeline_service',
    'ReportService', 'get_report_service',
    'ExperimentService', 'get_experiment_service'
]
