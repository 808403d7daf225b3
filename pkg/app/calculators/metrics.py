from dataclasses import asdict, dataclass
from typing import Iterable, Literal

from ..domain import DRUGCOMB_LABELS, Combination, EffectLabel, collapse_label
from ..errors import ArityViolationError, EmptyCorpusError

Scope = Literal["pos_only", "any"]
MatchKind = Literal["exact", "partial"]


@dataclass(frozen=True)
class MatchConfig:
    scope: Scope = "any"
    match_kind: MatchKind = "exact"
    partial_min_shared: int = 2
    label_sensitive: bool = False

    def __post_init__(self):
        if self.partial_min_shared < 2:
            raise ValueError("partial_min_shared must be at least 2")

    def to_dict(self) -> dict:
        return asdict(self)


# The four DrugComb report columns.
POS_EXACT = MatchConfig(scope="pos_only", match_kind="exact")
POS_PARTIAL = MatchConfig(scope="pos_only", match_kind="partial")
ANY_EXACT = MatchConfig(scope="any", match_kind="exact")
ANY_PARTIAL = MatchConfig(scope="any", match_kind="partial")
DRUGCOMB_REPORT_CONFIGS = {
    "pos_exact": POS_EXACT,
    "pos_partial": POS_PARTIAL,
    "any_exact": ANY_EXACT,
    "any_partial": ANY_PARTIAL,
}


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp_mass: float
    pred_count: float
    gold_count: float
    recall_mass: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def harmonic_mean(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def prf_from_counts(
    tp_mass: float, pred_count: float, gold_count: float, recall_mass: float | None = None
) -> PRF:
    """P/R/F1 from raw masses; empty-vs-empty scores 1, undefined ratios score 0."""
    if recall_mass is None:
        recall_mass = tp_mass
    if pred_count == 0 and gold_count == 0:
        return PRF(1.0, 1.0, 1.0, 0.0, 0, 0, 0.0)
    precision = tp_mass / pred_count if pred_count else 0.0
    recall = recall_mass / gold_count if gold_count else 0.0
    return PRF(
        precision=precision,
        recall=recall,
        f1=harmonic_mean(precision, recall),
        tp_mass=tp_mass,
        pred_count=pred_count,
        gold_count=gold_count,
        recall_mass=recall_mass,
    )


def micro_prf(prfs: Iterable[PRF]) -> PRF:
    tp = recall_mass = preds = golds = 0.0
    for prf in prfs:
        tp += prf.tp_mass
        recall_mass += prf.recall_mass
        preds += prf.pred_count
        golds += prf.gold_count
    return prf_from_counts(tp, preds, golds, recall_mass)


def _labels_agree(a: EffectLabel, b: EffectLabel) -> bool:
    if a in DRUGCOMB_LABELS and b in DRUGCOMB_LABELS:
        return collapse_label(a) == collapse_label(b)
    return a == b


def pair_score(p: Combination, g: Combination, cfg: MatchConfig) -> float:
    if cfg.scope == "pos_only" and not (p.label == EffectLabel.POS and g.label == EffectLabel.POS):
        return 0.0
    if cfg.label_sensitive and not _labels_agree(p.label, g.label):
        return 0.0

    if cfg.match_kind == "exact":
        return 1.0 if p.drugs == g.drugs else 0.0

    if p.drugs == g.drugs:
        return 1.0
    shared = len(p.drugs & g.drugs)
    if shared < cfg.partial_min_shared:
        return 0.0
    return shared / len(p.drugs | g.drugs)


def _in_scope(combinations, cfg: MatchConfig) -> list[Combination]:
    if cfg.scope == "pos_only":
        return [c for c in combinations if c.label == EffectLabel.POS]
    return list(combinations)


def instance_prf(preds, golds, cfg: MatchConfig) -> PRF:
    """Max-matching soft P/R/F1 for one instance.

    Each prediction is credited with its best gold score and each gold with its
    best prediction score; there is no one-to-one assignment.
    """
    preds = _in_scope(preds, cfg)
    golds = _in_scope(golds, cfg)
    precision_mass = sum(max((pair_score(p, g, cfg) for g in golds), default=0.0) for p in preds)
    recall_mass = sum(max((pair_score(p, g, cfg) for p in preds), default=0.0) for g in golds)
    return prf_from_counts(precision_mass, len(preds), len(golds), recall_mass)


def corpus_f1(instances, cfg: MatchConfig) -> PRF:
    """Micro-aggregated P/R/F1 over (preds, golds) pairs."""
    instances = list(instances)
    if not instances:
        raise EmptyCorpusError("corpus_f1 needs at least one instance")
    return micro_prf(instance_prf(preds, golds, cfg) for preds, golds in instances)


def _check_pairs(combinations) -> None:
    for combination in combinations:
        if len(combination.drugs) != 2:
            raise ArityViolationError(
                f"DDI pairs must have exactly 2 drugs, got {sorted(combination.drugs)}"
            )


def ddi_micro_f1(instances) -> PRF:
    """Typed-pair micro P/R/F1; a pair is correct only with the same drugs and type."""
    tp = preds_total = golds_total = 0
    for preds, golds in instances:
        preds, golds = set(preds), set(golds)
        _check_pairs(preds)
        _check_pairs(golds)
        tp += len(preds & golds)
        preds_total += len(preds)
        golds_total += len(golds)
    return prf_from_counts(tp, preds_total, golds_total)


def ner_f1(pred_entities, gold_entities) -> PRF:
    pred_entities, gold_entities = set(pred_entities), set(gold_entities)
    tp = len(pred_entities & gold_entities)
    return prf_from_counts(tp, len(pred_entities), len(gold_entities))


class MatchCalculator:
    """Scores prediction sets against gold sets under one MatchConfig."""

    def __init__(self, config: MatchConfig = ANY_EXACT):
        self.config = config

    def pair_score(self, p: Combination, g: Combination) -> float:
        return pair_score(p, g, self.config)

    def instance(self, preds, golds) -> PRF:
        return instance_prf(preds, golds, self.config)

    def corpus(self, instances) -> PRF:
        return corpus_f1(instances, self.config)
