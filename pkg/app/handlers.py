from typing import Optional

from pydantic import ValidationError

from .calculators.metrics import (
    DRUGCOMB_REPORT_CONFIGS,
    PRF,
    corpus_f1,
    ddi_micro_f1,
    micro_prf,
    ner_f1,
    prf_from_counts,
)
from .calculators.parser import ParsedResponse
from .calculators.rewards import RewardBreakdown, RewardCalculator, RewardWeights
from .config import HIGHER_ORDER_MIN_DRUGS, Settings
from .datasets import instance_from_record
from .domain import (
    Combination,
    Instance,
    NormalizationPolicy,
    TaskMode,
    combination_from_record,
    normalize_drug_name,
)
from .errors import ArityViolationError, IdMismatchError, SchemaViolationError
from .models import (
    CombinationRecord,
    EvaluateRequest,
    EvaluateResponse,
    GroupScoreItem,
    GroupScoreRequest,
    GroupScoreResponse,
    MetricEntry,
    ParsedSummaryResponse,
    PRFResponse,
    RewardBreakdownResponse,
    ScoreRequest,
    ScoreResponse,
    ThinkReportResponse,
    WeightOverrides,
)


def resolve_weights(base: RewardWeights, overrides: Optional[WeightOverrides]) -> RewardWeights:
    if overrides is None:
        return base
    try:
        return RewardWeights(**{**base.model_dump(), **overrides.model_dump(exclude_none=True)})
    except ValidationError as exc:
        raise SchemaViolationError(f"invalid weights: {exc.errors()[0]['msg']}") from exc


def records_to_gold(
    records: list[CombinationRecord], policy: NormalizationPolicy, mode: TaskMode
) -> frozenset[Combination]:
    gold = frozenset(combination_from_record(r.model_dump(), policy) for r in records)
    if mode == "ddi13":
        for combination in gold:
            if len(combination.drugs) != 2:
                raise ArityViolationError(
                    f"DDI gold pairs need exactly 2 drugs, got {sorted(combination.drugs)}"
                )
    return gold


def _parsed_summary(parsed: ParsedResponse) -> ParsedSummaryResponse:
    report = parsed.think_report
    return ParsedSummaryResponse(
        has_think=parsed.has_think,
        has_answer=parsed.has_answer,
        answer_json_valid=parsed.answer_json_valid,
        think_report=ThinkReportResponse(
            sections_present=list(report.sections_present),
            sections_in_order=report.sections_in_order,
            bullets_per_section=list(report.bullets_per_section),
            word_count=report.word_count,
        ) if report else None,
        combinations=[
            CombinationRecord(**c.to_record()) for c in
            sorted(parsed.combinations, key=lambda c: (c.label.value, sorted(c.drugs)))
        ] if parsed.combinations is not None else None,
        ner_entities=sorted(parsed.ner_entities) if parsed.ner_entities is not None else None,
        parse_notes=list(parsed.parse_notes),
    )


def _breakdown(breakdown: RewardBreakdown) -> RewardBreakdownResponse:
    return RewardBreakdownResponse(
        r_format=breakdown.r_format,
        r_cover=breakdown.r_cover,
        r_metric=breakdown.r_metric,
        r_total=breakdown.r_total,
        s_t=breakdown.s_t,
        s_a=breakdown.s_a,
        i_tag=breakdown.i_tag,
        r_ner=breakdown.r_ner,
        diagnostics=list(breakdown.diagnostics),
    )


def _calculator(req, settings: Settings, epsilon_std: Optional[float] = None) -> RewardCalculator:
    return RewardCalculator(
        weights=resolve_weights(settings.weights, req.weights),
        mode=req.mode,
        answer_format="extended" if req.extended else "standard",
        policy=settings.policy,
        epsilon_std=epsilon_std or settings.epsilon_std,
    )


def _gold_entities(req, policy: NormalizationPolicy) -> Optional[frozenset[str]]:
    if req.gold_entities is None:
        return None
    return frozenset(normalize_drug_name(e, policy) for e in req.gold_entities)


def handle_score(req: ScoreRequest, settings: Settings) -> ScoreResponse:
    calculator = _calculator(req, settings)
    gold = records_to_gold(req.gold, settings.policy, req.mode)
    breakdown, parsed = calculator.score(req.response_text, gold, _gold_entities(req, settings.policy))
    return ScoreResponse(reward=_breakdown(breakdown), parsed=_parsed_summary(parsed))


def handle_group_score(req: GroupScoreRequest, settings: Settings) -> GroupScoreResponse:
    calculator = _calculator(req, settings, req.epsilon_std)
    gold = records_to_gold(req.gold, settings.policy, req.mode)
    scored = calculator.score_group(req.responses, gold, _gold_entities(req, settings.policy))
    results = [
        GroupScoreItem(reward=_breakdown(b), parsed=_parsed_summary(p), advantage=a)
        for b, p, a in scored
    ]
    mean = sum(item.reward.r_total for item in results) / len(results)
    return GroupScoreResponse(results=results, mean_reward=mean)


def _prf(prf: PRF) -> PRFResponse:
    return PRFResponse(**prf.to_dict())


def _entry(config: dict, prf: PRF) -> MetricEntry:
    return MetricEntry(config=config, scores=_prf(prf))


def align_instances(predictions: list[Instance], gold: list[Instance]) -> list[tuple[Instance, Instance]]:
    predicted = {p.id: p for p in predictions}
    expected = {g.id for g in gold}
    missing_in_predictions = sorted(expected - predicted.keys())
    missing_in_gold = sorted(predicted.keys() - expected)
    if missing_in_predictions or missing_in_gold:
        raise IdMismatchError(missing_in_predictions, missing_in_gold)
    return [(predicted[g.id], g) for g in gold]


def evaluate_instances(
    predictions: list[Instance],
    gold: list[Instance],
    mode: Optional[TaskMode] = None,
    higher_order_min_drugs: int = HIGHER_ORDER_MIN_DRUGS,
) -> EvaluateResponse:
    pairs = align_instances(predictions, gold)
    mode = mode or (gold[0].task_mode if gold else "drugcomb")
    sets = [(p.gold, g.gold) for p, g in pairs]

    if mode == "ddi13":
        metrics = {"typed_micro": _entry({"matching": "typed_pair_one_to_one"}, ddi_micro_f1(sets))}
    else:
        metrics = {
            name: _entry(cfg.to_dict(), corpus_f1(sets, cfg))
            for name, cfg in DRUGCOMB_REPORT_CONFIGS.items()
        }

    ner = None
    with_entities = [(p, g) for p, g in pairs if p.entity_hints is not None and g.entity_hints is not None]
    if with_entities:
        ner = _prf(micro_prf(ner_f1(p.entity_hints, g.entity_hints) for p, g in with_entities))

    # NO_COMB treated as an instance-level class: predicted iff the prediction set is empty.
    no_comb_tp = sum(1 for preds, golds in sets if not preds and not golds)
    no_comb = prf_from_counts(
        no_comb_tp,
        sum(1 for preds, _ in sets if not preds),
        sum(1 for _, golds in sets if not golds),
    )
    subsets: dict[str, Optional[MetricEntry]] = {"no_comb": _entry({"class": "NO_COMB"}, no_comb)}
    if mode == "drugcomb":
        higher = [
            (preds, golds) for preds, golds in sets
            if any(len(c.drugs) >= higher_order_min_drugs for c in golds)
        ]
        for name, cfg in DRUGCOMB_REPORT_CONFIGS.items():
            subsets[f"higher_order_{name}"] = (
                _entry({**cfg.to_dict(), "min_gold_drugs": higher_order_min_drugs},
                       corpus_f1(higher, cfg))
                if higher else None
            )

    return EvaluateResponse(
        mode=mode, instances=len(pairs), metrics=metrics, ner=ner, subsets=subsets
    )


def handle_evaluate(req: EvaluateRequest, settings: Settings) -> EvaluateResponse:
    policy = settings.policy
    predictions = [instance_from_record(r.model_dump(), policy) for r in req.predictions]
    gold = [instance_from_record(r.model_dump(), policy) for r in req.gold]
    return evaluate_instances(predictions, gold, req.mode, settings.higher_order_min_drugs)
