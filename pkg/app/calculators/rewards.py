import math
import statistics
from dataclasses import dataclass, field
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..domain import DEFAULT_POLICY, NormalizationPolicy, TaskMode
from ..errors import EmptyGroupError
from .metrics import MatchConfig, ddi_micro_f1, instance_prf, ner_f1, prf_from_counts
from .parser import AnswerFormat, ParsedResponse, parse_response

DEFAULT_EPSILON_STD = 1e-8
WEIGHT_TOLERANCE = 1e-9

# Budget of each format sub-score; with the 0.5 base r_format spans [0.5, 1.0].
FORMAT_BASE = 0.5
THINK_SCORE_MAX = 0.25
ANSWER_SCORE_MAX = 0.25


class RewardWeights(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha_format: float = Field(default=0.2, ge=0)
    alpha_cover: float = Field(default=0.1, ge=0)
    alpha_metric: float = Field(default=0.7, ge=0)
    metric_exact_weight: float = Field(default=2 / 3, ge=0)
    metric_partial_weight: float = Field(default=1 / 3, ge=0)
    alpha_ner: float = Field(default=0.0, ge=0)
    metric_scope: Literal["any", "pos_only"] = "any"
    empty_empty_cover: float = Field(default=1.0, ge=-1, le=1)
    spurious_cover: float = Field(default=0.0, ge=-1, le=1)

    @model_validator(mode="after")
    def check_sums(self) -> "RewardWeights":
        alphas = self.alpha_format + self.alpha_cover + self.alpha_metric
        if abs(alphas - 1) > WEIGHT_TOLERANCE:
            raise ValueError(f"alpha_format + alpha_cover + alpha_metric must be 1, got {alphas}")
        metric = self.metric_exact_weight + self.metric_partial_weight
        if abs(metric - 1) > WEIGHT_TOLERANCE:
            raise ValueError(
                f"metric_exact_weight + metric_partial_weight must be 1, got {metric}"
            )
        return self


DEFAULT_WEIGHTS = RewardWeights()


@dataclass(frozen=True)
class FormatScore:
    r_format: float
    s_t: float
    s_a: float
    i_tag: bool


@dataclass(frozen=True)
class RewardBreakdown:
    r_format: float
    r_cover: float
    r_metric: float
    r_total: float
    s_t: float
    s_a: float
    i_tag: bool
    r_ner: Optional[float] = None
    diagnostics: list[str] = field(default_factory=list)


def format_reward(parsed: ParsedResponse) -> FormatScore:
    i_tag = parsed.has_think and parsed.has_answer
    if not i_tag:
        return FormatScore(r_format=0.0, s_t=0.0, s_a=0.0, i_tag=False)

    s_t = 0.0
    report = parsed.think_report
    if report is not None and report.present_count:
        s_t = THINK_SCORE_MAX * (report.present_count / len(report.sections_present))
        s_t *= 1.0 if report.sections_in_order else 0.5
        s_t *= 1.0 if report.all_present_have_bullets else 0.5
    s_a = ANSWER_SCORE_MAX if parsed.answer_json_valid else 0.0
    return FormatScore(r_format=FORMAT_BASE + s_t + s_a, s_t=s_t, s_a=s_a, i_tag=True)


def coverage_reward(
    preds,
    golds,
    empty_empty: float = DEFAULT_WEIGHTS.empty_empty_cover,
    spurious: float = DEFAULT_WEIGHTS.spurious_cover,
) -> float:
    """Average best gold coverage per prediction, -1 for a wrongly empty answer."""
    preds, golds = list(preds), list(golds)
    if not preds:
        return -1.0 if golds else empty_empty
    if not golds:
        return spurious
    total = sum(
        max(len(p.drugs & g.drugs) / len(g.drugs) for g in golds) for p in preds
    )
    return total / len(preds)


def split_pairs(preds) -> tuple[frozenset, int]:
    """Keep the two-drug predictions; return them with the number dropped."""
    preds = frozenset(preds)
    pairs = frozenset(p for p in preds if len(p.drugs) == 2)
    return pairs, len(preds) - len(pairs)


def ddi_pair_f1(preds, golds) -> float:
    # Non-pair predictions can't match any gold pair, so they only add false positives.
    pairs, dropped = split_pairs(preds)
    prf = ddi_micro_f1([(pairs, golds)])
    if dropped:
        prf = prf_from_counts(prf.tp_mass, prf.pred_count + dropped, prf.gold_count)
    return prf.f1


def metric_reward(
    preds, golds, weights: RewardWeights = DEFAULT_WEIGHTS, mode: TaskMode = "drugcomb"
) -> float:
    if mode == "ddi13":
        return ddi_pair_f1(preds, golds)
    exact = MatchConfig(scope=weights.metric_scope, match_kind="exact", label_sensitive=True)
    partial = MatchConfig(scope=weights.metric_scope, match_kind="partial", label_sensitive=True)
    f1_exact = instance_prf(preds, golds, exact).f1
    f1_partial = instance_prf(preds, golds, partial).f1
    return weights.metric_exact_weight * f1_exact + weights.metric_partial_weight * f1_partial


def total_reward(
    r_format: float,
    r_cover: float,
    r_metric: float,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    r_ner: Optional[float] = None,
) -> float:
    r_total = (
        weights.alpha_format * r_format
        + weights.alpha_cover * r_cover
        + weights.alpha_metric * r_metric
    )
    if r_ner is not None and weights.alpha_ner > 0:
        r_total = (r_total + weights.alpha_ner * r_ner) / (1 + weights.alpha_ner)
    return r_total


def combined_reward(
    parsed: ParsedResponse,
    golds,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    mode: TaskMode = "drugcomb",
    gold_entities=None,
) -> RewardBreakdown:
    preds = parsed.combinations if parsed.combinations is not None else frozenset()
    fmt = format_reward(parsed)
    r_cover = coverage_reward(preds, golds, weights.empty_empty_cover, weights.spurious_cover)
    r_metric = metric_reward(preds, golds, weights, mode)

    r_ner = None
    if weights.alpha_ner > 0:
        predicted = parsed.ner_entities
        r_ner = ner_f1(predicted, gold_entities or ()).f1 if predicted is not None else 0.0
    r_total = total_reward(fmt.r_format, r_cover, r_metric, weights, r_ner)

    diagnostics = [
        f"r_format={fmt.r_format:.6f} (s_t={fmt.s_t:.6f}, s_a={fmt.s_a:.6f}, i_tag={fmt.i_tag})",
        f"r_cover={r_cover:.6f}",
        f"r_metric={r_metric:.6f}",
    ]
    if r_ner is not None:
        diagnostics.append(f"r_ner={r_ner:.6f}")
    if parsed.combinations is None:
        diagnostics.append("no valid answer payload, predictions treated as empty")
    if mode == "ddi13":
        _, dropped = split_pairs(preds)
        if dropped:
            diagnostics.append(f"{dropped} non-pair prediction(s) counted as false positives")
    diagnostics.extend(parsed.parse_notes)

    return RewardBreakdown(
        r_format=fmt.r_format,
        r_cover=r_cover,
        r_metric=r_metric,
        r_total=r_total,
        s_t=fmt.s_t,
        s_a=fmt.s_a,
        i_tag=fmt.i_tag,
        r_ner=r_ner,
        diagnostics=diagnostics,
    )


def group_advantages(rewards: list[float], epsilon_std: float = DEFAULT_EPSILON_STD) -> list[float]:
    """Standardize rewards within their group using the population std."""
    if not rewards:
        raise EmptyGroupError("group_advantages needs at least one reward")
    if epsilon_std <= 0:
        raise ValueError("epsilon_std must be positive")
    mean = math.fsum(rewards) / len(rewards)
    std = statistics.pstdev(rewards, mu=mean)
    if std < epsilon_std:
        return [0.0] * len(rewards)
    return [(r - mean) / std for r in rewards]


class RewardCalculator:
    def __init__(
        self,
        weights: RewardWeights = DEFAULT_WEIGHTS,
        mode: TaskMode = "drugcomb",
        answer_format: AnswerFormat = "standard",
        policy: NormalizationPolicy = DEFAULT_POLICY,
        epsilon_std: float = DEFAULT_EPSILON_STD,
    ):
        self.weights = weights
        self.mode = mode
        self.answer_format = answer_format
        self.policy = policy
        self.epsilon_std = epsilon_std

    def score(self, response_text: str, golds, gold_entities=None) -> tuple[RewardBreakdown, ParsedResponse]:
        parsed = parse_response(response_text, self.policy, self.answer_format)
        breakdown = combined_reward(parsed, golds, self.weights, self.mode, gold_entities)
        return breakdown, parsed

    def score_group(
        self, responses: list[str], golds, gold_entities=None
    ) -> list[tuple[RewardBreakdown, ParsedResponse, float]]:
        if not responses:
            raise EmptyGroupError("a group needs at least one response")
        scored = [self.score(text, golds, gold_entities) for text in responses]
        advantages = group_advantages([b.r_total for b, _ in scored], self.epsilon_std)
        return [(b, p, a) for (b, p), a in zip(scored, advantages)]
