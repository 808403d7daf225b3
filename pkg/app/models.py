from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

ModeName = Literal["drugcomb", "ddi13"]


class CombinationRecord(BaseModel):
    drugs: list[str]
    label: str


class WeightOverrides(BaseModel):
    alpha_format: Optional[float] = None
    alpha_cover: Optional[float] = None
    alpha_metric: Optional[float] = None
    metric_exact_weight: Optional[float] = None
    metric_partial_weight: Optional[float] = None
    alpha_ner: Optional[float] = None
    metric_scope: Optional[Literal["any", "pos_only"]] = None
    empty_empty_cover: Optional[float] = None
    spurious_cover: Optional[float] = None


class ScoreRequest(BaseModel):
    response_text: str = ""
    gold: list[CombinationRecord] = Field(default_factory=list)
    mode: ModeName = "drugcomb"
    extended: bool = False
    weights: Optional[WeightOverrides] = None
    gold_entities: Optional[list[str]] = None  # only used when alpha_ner > 0


class GroupScoreRequest(BaseModel):
    responses: list[str] = Field(min_length=1)
    gold: list[CombinationRecord] = Field(default_factory=list)
    mode: ModeName = "drugcomb"
    extended: bool = False
    weights: Optional[WeightOverrides] = None
    gold_entities: Optional[list[str]] = None
    epsilon_std: Optional[float] = Field(default=None, gt=0)


class CanonicalRecord(BaseModel):
    id: str
    sentence: str = ""
    context: Optional[str] = None
    mode: ModeName = "drugcomb"
    gold: list[CombinationRecord] = Field(default_factory=list)
    entities: Optional[list[str]] = None


class EvaluateRequest(BaseModel):
    predictions: list[CanonicalRecord]
    gold: list[CanonicalRecord] = Field(min_length=1)
    mode: Optional[ModeName] = None


class ThinkReportResponse(BaseModel):
    sections_present: list[bool]
    sections_in_order: bool
    bullets_per_section: list[int]
    word_count: int


class ParsedSummaryResponse(BaseModel):
    has_think: bool
    has_answer: bool
    answer_json_valid: bool
    think_report: Optional[ThinkReportResponse] = None
    combinations: Optional[list[CombinationRecord]] = None
    ner_entities: Optional[list[str]] = None
    parse_notes: list[str] = Field(default_factory=list)


class RewardBreakdownResponse(BaseModel):
    r_format: float
    r_cover: float
    r_metric: float
    r_total: float
    s_t: float
    s_a: float
    i_tag: bool
    r_ner: Optional[float] = None
    diagnostics: list[str] = Field(default_factory=list)


class ScoreResponse(BaseModel):
    reward: RewardBreakdownResponse
    parsed: ParsedSummaryResponse


class GroupScoreItem(BaseModel):
    reward: RewardBreakdownResponse
    parsed: ParsedSummaryResponse
    advantage: float


class GroupScoreResponse(BaseModel):
    results: list[GroupScoreItem]
    mean_reward: float


class PRFResponse(BaseModel):
    precision: float
    recall: float
    f1: float
    tp_mass: float
    pred_count: float
    gold_count: float
    recall_mass: float


class MetricEntry(BaseModel):
    config: dict[str, Any]  # exact MatchConfig used
    scores: PRFResponse


class EvaluateResponse(BaseModel):
    mode: ModeName
    instances: int
    metrics: dict[str, MetricEntry]
    ner: Optional[PRFResponse] = None
    subsets: dict[str, Optional[MetricEntry]] = Field(default_factory=dict)


class HealthResponse(BaseModel):
    status: str
    version: str
