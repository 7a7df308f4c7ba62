from datetime import datetime
from typing import Any, Dict, Iterable, List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from app.domain.schema.fav_schema import Verdict
from app.domain.schema.layout_schema import UnmappedRange

REPORT_SCHEMA_VERSION = 1
BLOCK_POPULATION = "every block of every dirty extent in the epoch window"


class Metrics(BaseModel):
    accuracy: float
    precision: float
    recall: float
    f1: float


class ConfusionMatrix(BaseModel):
    tp: int = Field(0, ge=0)
    tn: int = Field(0, ge=0)
    fp: int = Field(0, ge=0)
    fn: int = Field(0, ge=0)

    @classmethod
    def from_labels(cls, predicted: Iterable, positives: Iterable, population: Iterable) -> "ConfusionMatrix":
        predicted, positives = set(predicted), set(positives)
        matrix = cls()
        for item in set(population):
            hit, label = item in predicted, item in positives
            if hit and label:
                matrix.tp += 1
            elif hit:
                matrix.fp += 1
            elif label:
                matrix.fn += 1
            else:
                matrix.tn += 1
        return matrix

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def metrics(self) -> Metrics:
        """Standard definitions; a ratio with an empty denominator counts as 1.0."""
        accuracy = (self.tp + self.tn) / self.total if self.total else 1.0
        precision = self.tp / (self.tp + self.fp) if self.tp + self.fp else 1.0
        recall = self.tp / (self.tp + self.fn) if self.tp + self.fn else 1.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return Metrics(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


class Scores(BaseModel):
    block_level: Metrics
    file_level: Metrics


class StageTimings(BaseModel):
    delta: float = 0.0
    sawa: float = 0.0
    mapping: float = 0.0
    fav: float = 0.0
    output: float = 0.0

    @property
    def total(self) -> float:
        return self.delta + self.sawa + self.mapping + self.fav + self.output


class DetectionReport(BaseModel):
    schema_version: int = REPORT_SCHEMA_VERSION
    created_at: datetime = Field(default_factory=datetime.utcnow)
    e_i: int
    e_j: int
    params: Dict[str, Any] = Field(default_factory=dict)
    prefilter: Literal["sawa", "flag_all"] = "sawa"
    block_population: str = BLOCK_POPULATION
    dirty_blocks: List[int] = Field(default_factory=list)
    population_blocks: List[int] = Field(default_factory=list, description="Blocks the block-level counts range over")
    positive_blocks: List[int] = Field(default_factory=list)
    delta_blocks: int = 0
    changed_bytes: int = 0
    suspicious_ranges: int = 0
    forwarded_small: int = 0
    unmapped: List[UnmappedRange] = Field(default_factory=list)
    verdicts: List[Verdict] = Field(default_factory=list)
    file_population: List[str] = Field(default_factory=list)
    timings: StageTimings = Field(default_factory=StageTimings)
    wall_seconds: float = 0.0
    block_level: Optional[ConfusionMatrix] = None
    file_level: Optional[ConfusionMatrix] = None

    model_config = {
        "json_schema_extra": {
            "example": {
                "schema_version": 1,
                "e_i": 2,
                "e_j": 2,
                "prefilter": "sawa",
                "verdicts": [{"path": "docs/report.pdf.enc", "format": "Pdf", "decision": "Suspicious",
                              "reasons": ["PDF_STRUCT_VIOLATION"], "findings": []}],
                "block_level": {"tp": 80, "tn": 1200, "fp": 0, "fn": 0},
                "file_level": {"tp": 10, "tn": 12, "fp": 0, "fn": 0}
            }
        }
    }

    @model_validator(mode="after")
    def check_epochs(self):
        if self.e_i > self.e_j:
            raise ValueError("epoch window is reversed")
        return self

    @property
    def suspicious_files(self) -> List[str]:
        return [v.path for v in self.verdicts if v.suspicious]

    @property
    def has_detections(self) -> bool:
        return any(v.suspicious for v in self.verdicts)

    def scores(self) -> Optional[Scores]:
        if self.block_level is None or self.file_level is None:
            return None
        return Scores(block_level=self.block_level.metrics(), file_level=self.file_level.metrics())


class BaselineParams(BaseModel):
    entropy_threshold: float = Field(..., description="Files above this many bits/byte are flagged")
    chi2_threshold: float = Field(..., description="Files below this chi-squared are flagged")
    tuned_on: str = ""

    model_config = {
        "json_schema_extra": {
            "example": {"entropy_threshold": 7.91, "chi2_threshold": 412.5, "tuned_on": "corpus/clean"}
        }
    }


class SweepPoint(BaseModel):
    format: str
    n: int
    detected: int
    total: int

    @property
    def rate(self) -> float:
        return self.detected / self.total if self.total else 0.0


class BaselineComparison(BaseModel):
    format: str
    n: int
    total: int
    fav: int
    entropy: int
    chi2: int
    clean_fp: Dict[str, int] = Field(default_factory=dict)


class ProtocolRun(BaseModel):
    """One clone-mode campaign over a small corpus, detected and scored."""
    pattern: str
    originals: List[str]
    extras: List[str]
    report: DetectionReport
    scores: Scores


class DetectionRequest(BaseModel):
    e_i: int = Field(..., ge=1, description="First epoch of the window")
    e_j: int = Field(..., ge=1, description="Last epoch of the window")
    layout_path: str
    manifest_path: Optional[str] = None
    ground_truth_path: Optional[str] = Field(None, description="Campaign result used to score the run")
    sawa_window: Optional[int] = Field(None, ge=1)
    sawa_stride: Optional[int] = Field(None, ge=1)
    sawa_tau: Optional[float] = Field(None, gt=0)
    fav_depth: Optional[int] = Field(None, ge=0)
    fav_byte_budget: Optional[int] = Field(None, ge=0)
    gap_limit: Optional[int] = Field(None, ge=0)
    nlp_heuristic: Optional[bool] = None
    min_gap_length: Optional[int] = Field(None, ge=1)
    flag_all: bool = False
    save: bool = False

    model_config = {
        "json_schema_extra": {
            "example": {
                "e_i": 1,
                "e_j": 2,
                "layout_path": "layout.json",
                "manifest_path": "manifest.json",
                "ground_truth_path": "campaign.json",
                "save": True
            }
        }
    }

    @model_validator(mode="after")
    def check_window(self):
        if self.e_i > self.e_j:
            raise ValueError("epoch window is reversed")
        return self
