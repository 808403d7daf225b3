import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, Optional

from .errors import ArityViolationError, EmptyNameError, InvalidLabelError

TaskMode = Literal["drugcomb", "ddi13"]


class EffectLabel(str, Enum):
    # n-ary drug combination task
    POS = "POS"
    NEG = "NEG"
    COMB = "COMB"
    OTHER = "OTHER"
    NO_COMB = "NO_COMB"
    # binary DDI task
    MECHANISM = "MECHANISM"
    EFFECT = "EFFECT"
    ADVICE = "ADVICE"
    INT = "INT"


DRUGCOMB_LABELS = frozenset(
    {EffectLabel.POS, EffectLabel.NEG, EffectLabel.COMB, EffectLabel.OTHER, EffectLabel.NO_COMB}
)
DDI_LABELS = frozenset(
    {EffectLabel.MECHANISM, EffectLabel.EFFECT, EffectLabel.ADVICE, EffectLabel.INT, EffectLabel.NO_COMB}
)

# Spellings found in source corpora and model outputs, keyed by upper-cased text.
LABEL_ALIASES = {
    "POS_COMB": EffectLabel.POS,
    "NEG_COMB": EffectLabel.NEG,
    "NO-COMB": EffectLabel.NO_COMB,
    "NOCOMB": EffectLabel.NO_COMB,
    "ADVISE": EffectLabel.ADVICE,
    "ADV": EffectLabel.ADVICE,
    "EFF": EffectLabel.EFFECT,
    "MEC": EffectLabel.MECHANISM,
    "DDI-MECHANISM": EffectLabel.MECHANISM,
    "DDI-EFFECT": EffectLabel.EFFECT,
    "DDI-ADVISE": EffectLabel.ADVICE,
    "DDI-INT": EffectLabel.INT,
}

_COLLAPSED = {
    EffectLabel.POS: EffectLabel.POS,
    EffectLabel.NEG: EffectLabel.OTHER,
    EffectLabel.COMB: EffectLabel.OTHER,
    EffectLabel.OTHER: EffectLabel.OTHER,
    EffectLabel.NO_COMB: EffectLabel.NO_COMB,
}

SURROUNDING_PUNCTUATION = ".,;:!?()[]\"'"


def parse_label(text: str) -> EffectLabel:
    """Resolve a label string (any case, known aliases) to an EffectLabel."""
    key = str(text).strip().upper()
    if key in EffectLabel.__members__:
        return EffectLabel[key]
    if key in LABEL_ALIASES:
        return LABEL_ALIASES[key]
    raise InvalidLabelError(f"Unknown label: {text!r}")


def collapse_label(label: EffectLabel) -> EffectLabel:
    """Map NEG and COMB onto OTHER for the evaluation view."""
    if label not in _COLLAPSED:
        raise InvalidLabelError(f"{label.value} is not a drug-combination label")
    return _COLLAPSED[label]


@dataclass(frozen=True)
class NormalizationPolicy:
    case_fold: bool = True
    trim_whitespace: bool = True
    collapse_internal_whitespace: bool = True
    strip_surrounding_punctuation: bool = True


DEFAULT_POLICY = NormalizationPolicy()


def normalize_drug_name(raw: str, policy: NormalizationPolicy = DEFAULT_POLICY) -> str:
    """Canonical drug-name form.

    Steps run in this order: trim, collapse whitespace runs, strip surrounding
    punctuation (and whitespace when trimming), case-fold.
    """
    name = raw
    if policy.trim_whitespace:
        name = name.strip()
    if policy.collapse_internal_whitespace:
        name = re.sub(r"\s+", " ", name)
    if policy.strip_surrounding_punctuation:
        chars = re.escape(SURROUNDING_PUNCTUATION)
        if policy.trim_whitespace:
            pattern = rf"^[\s{chars}]+|[\s{chars}]+$"
        else:
            pattern = rf"^[{chars}]+|[{chars}]+$"
        name = re.sub(pattern, "", name)
    if policy.case_fold:
        name = name.casefold()
    if not name:
        raise EmptyNameError(f"Drug name {raw!r} is empty after normalization")
    return name


@dataclass(frozen=True)
class Combination:
    drugs: frozenset[str]
    label: EffectLabel

    def __post_init__(self):
        if not isinstance(self.drugs, frozenset):
            object.__setattr__(self, "drugs", frozenset(self.drugs))
        if self.label == EffectLabel.NO_COMB:
            raise InvalidLabelError("NO_COMB is the empty set, never a combination label")
        if len(self.drugs) < 2:
            raise ArityViolationError(
                f"A combination needs at least 2 distinct drugs, got {sorted(self.drugs)}"
            )

    def to_record(self) -> dict:
        return {"drugs": sorted(self.drugs), "label": self.label.value}


def combination_from_record(
    record: dict, policy: NormalizationPolicy = DEFAULT_POLICY
) -> Combination:
    drugs = frozenset(normalize_drug_name(d, policy) for d in record["drugs"])
    return Combination(drugs=drugs, label=parse_label(record["label"]))


def sort_combinations(combinations) -> list[Combination]:
    return sorted(combinations, key=lambda c: (c.label.value, sorted(c.drugs)))


def serialize_combinations(combinations) -> str:
    """Canonical answer JSON: array of {"drugs": [...], "label": ...}."""
    return json.dumps(
        [c.to_record() for c in sort_combinations(combinations)], ensure_ascii=False
    )


@dataclass(frozen=True)
class Instance:
    id: str
    sentence: str
    context: Optional[str] = None
    gold: frozenset[Combination] = field(default_factory=frozenset)
    entity_hints: Optional[frozenset[str]] = None
    task_mode: TaskMode = "drugcomb"

    def __post_init__(self):
        if not isinstance(self.gold, frozenset):
            object.__setattr__(self, "gold", frozenset(self.gold))
        if self.entity_hints is not None and not isinstance(self.entity_hints, frozenset):
            object.__setattr__(self, "entity_hints", frozenset(self.entity_hints))
        if self.task_mode == "ddi13":
            for combination in self.gold:
                if len(combination.drugs) != 2:
                    raise ArityViolationError(
                        f"Instance {self.id}: DDI pairs must have exactly 2 drugs, "
                        f"got {sorted(combination.drugs)}"
                    )
