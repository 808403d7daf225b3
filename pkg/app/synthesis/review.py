import json
import math
import re
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

from ..errors import ReviewParseError

CRITERIA = (
    "format_compliance",
    "medical_validity",
    "semantic_consistency",
    "factual_consistency",
    "narrative_naturalness",
    "logical_completeness",
)

# Alternative dimension wording reviewers use for the same six criteria.
CRITERION_ALIASES = {
    "format": "format_compliance",
    "medical_plausibility": "medical_validity",
    "semantic_alignment": "semantic_consistency",
    "consistency_with_the_extracted_result": "factual_consistency",
    "consistency_with_extracted_result": "factual_consistency",
    "naturalness_of_reasoning": "narrative_naturalness",
    "task_usability": "logical_completeness",
}

SCORE_MIN = 0
SCORE_MAX = 5


@dataclass(frozen=True)
class RubricScores:
    format_compliance: int
    medical_validity: int
    semantic_consistency: int
    factual_consistency: int
    narrative_naturalness: int
    logical_completeness: int
    comments: dict[str, str] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        for name in CRITERIA:
            value = getattr(self, name)
            if not isinstance(value, int) or not SCORE_MIN <= value <= SCORE_MAX:
                raise ValueError(f"{name} must be an integer in 0..5, got {value!r}")

    def as_dict(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in CRITERIA}

    def to_dict(self) -> dict:
        data = asdict(self)
        data["notes"] = list(self.notes)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RubricScores":
        return cls(
            **{name: data[name] for name in CRITERIA},
            comments=dict(data.get("comments") or {}),
            notes=tuple(data.get("notes") or ()),
        )


def accept(scores: RubricScores, threshold: int = 4) -> bool:
    return min(scores.as_dict().values()) >= threshold


def _canonical_key(key: Any) -> str:
    name = re.sub(r"[\s\-]+", "_", str(key).strip().lower())
    return CRITERION_ALIASES.get(name, name)


def _criteria_view(obj: dict) -> dict[str, Any]:
    view = {}
    for key, value in obj.items():
        name = _canonical_key(key)
        if name in CRITERIA and name not in view:
            view[name] = value
    return view


def _find_rubric(value: Any) -> Optional[dict]:
    """Depth-first search for the first object carrying all six criteria."""
    if isinstance(value, dict):
        if len(_criteria_view(value)) == len(CRITERIA):
            return value
        for child in value.values():
            found = _find_rubric(child)
            if found is not None:
                return found
    elif isinstance(value, list):
        for child in value:
            found = _find_rubric(child)
            if found is not None:
                return found
    return None


def _as_number(value: Any) -> Optional[float]:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, str):
        match = re.search(r"-?\d+(?:\.\d+)?", value)
        if match:
            return float(match.group(0))
    return None


def _score_and_comment(value: Any) -> tuple[Optional[float], Optional[str]]:
    if isinstance(value, dict):
        lowered = {str(k).lower(): v for k, v in value.items()}
        score = _as_number(lowered.get("score"))
        comment = lowered.get("comment") or lowered.get("comments") or lowered.get("feedback")
        return score, str(comment) if comment else None
    return _as_number(value), None


def _sibling_comments(container: dict) -> dict[str, str]:
    for key in ("comments", "feedback"):
        for k, v in container.items():
            if str(k).lower() == key and isinstance(v, dict):
                return {
                    _canonical_key(name): str(text) for name, text in v.items() if text
                }
    return {}


def _candidates(text: str):
    decoder = json.JSONDecoder()
    for match in re.finditer(r"\{", text):
        try:
            value, _ = decoder.raw_decode(text, match.start())
        except ValueError:
            continue
        yield value


def parse_review(reviewer_output: str) -> RubricScores:
    """Read the six rubric scores from free-form reviewer text."""
    for candidate in _candidates(reviewer_output or ""):
        rubric = _find_rubric(candidate)
        if rubric is None:
            continue

        notes = []
        scores = {}
        comments = _sibling_comments(rubric)
        if isinstance(candidate, dict) and candidate is not rubric:
            comments = {**_sibling_comments(candidate), **comments}
        for name, value in _criteria_view(rubric).items():
            score, comment = _score_and_comment(value)
            if score is None:
                break
            clamped = int(round(min(max(score, SCORE_MIN), SCORE_MAX)))
            if clamped != score:
                notes.append(f"{name}: score {score:g} clamped to {clamped}")
            scores[name] = clamped
            if comment:
                comments[name] = comment
        else:
            overall = next(
                (v for k, v in rubric.items() if str(k).lower() in ("overall", "summary")), None
            )
            if isinstance(overall, str) and overall:
                comments["overall"] = overall
            return RubricScores(**scores, comments=comments, notes=tuple(notes))

    raise ReviewParseError("no JSON object with all six rubric criteria in reviewer output")
