import json
import re
from dataclasses import dataclass, field
from typing import Any, Literal, Optional

from ..domain import (
    DEFAULT_POLICY,
    Combination,
    EffectLabel,
    NormalizationPolicy,
    normalize_drug_name,
    parse_label,
    serialize_combinations,
)
from ..errors import DrugCombError

AnswerFormat = Literal["standard", "extended"]

SECTION_COUNT = 4

# Tolerant input keys, first match wins.
DRUG_KEYS = ("drugs", "combination", "entities")
LABEL_KEYS = ("label", "relation", "class", "effect")

THINK_PATTERN = re.compile(r"<think>(.*?)</think>", re.DOTALL)
ANSWER_PATTERN = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)
NER_PATTERN = re.compile(r"@ner#(.*?)#ner@", re.DOTALL)
RE_PATTERN = re.compile(r"@re#(.*?)#re@", re.DOTALL)
FENCE_PATTERN = re.compile(r"^```(?:json)?\s*(.*?)\s*```$", re.DOTALL)
HEADER_PATTERN = re.compile(r"^\s*\[(\d+)\]")
BULLET_PATTERN = re.compile(r"^\s*- ")


@dataclass(frozen=True)
class ThinkStructureReport:
    sections_present: tuple[bool, ...]
    sections_in_order: bool
    bullets_per_section: tuple[int, ...]
    word_count: int

    @property
    def present_count(self) -> int:
        return sum(self.sections_present)

    @property
    def all_present_have_bullets(self) -> bool:
        return all(
            bullets > 0
            for present, bullets in zip(self.sections_present, self.bullets_per_section)
            if present
        )


@dataclass(frozen=True)
class ParsedResponse:
    has_think: bool
    has_answer: bool
    think_text: Optional[str] = None
    think_report: Optional[ThinkStructureReport] = None
    combinations: Optional[frozenset[Combination]] = None
    ner_entities: Optional[frozenset[str]] = None
    answer_json_valid: bool = False
    parse_notes: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class AnswerPayload:
    combinations: frozenset[Combination]
    ner_entities: Optional[frozenset[str]]
    json_valid: bool
    notes: list[str]


def analyze_think(think_text: str) -> ThinkStructureReport:
    present = [False] * SECTION_COUNT
    bullets = [0] * SECTION_COUNT
    first_seen: list[int] = []
    current = None

    for line in think_text.splitlines():
        header = HEADER_PATTERN.match(line)
        if header:
            k = int(header.group(1))
            if 1 <= k <= SECTION_COUNT:
                if not present[k - 1]:
                    present[k - 1] = True
                    first_seen.append(k)
                current = k
                continue
        if current is not None and BULLET_PATTERN.match(line):
            bullets[current - 1] += 1

    in_order = all(a < b for a, b in zip(first_seen, first_seen[1:]))
    return ThinkStructureReport(
        sections_present=tuple(present),
        sections_in_order=in_order,
        bullets_per_section=tuple(bullets),
        word_count=len(think_text.split()),
    )


def _load_json(text: str) -> tuple[bool, Any]:
    body = text.strip()
    fenced = FENCE_PATTERN.match(body)
    if fenced:
        body = fenced.group(1)
    try:
        return True, json.loads(body)
    except (ValueError, RecursionError):
        return False, None


def _first_key(obj: dict, keys: tuple[str, ...]) -> Any:
    lowered = {str(k).lower(): v for k, v in obj.items()}
    for key in keys:
        if key in lowered:
            return lowered[key]
    return None


def _normalize_names(raw_names: Any, policy: NormalizationPolicy, notes: list[str]) -> set[str]:
    names = set()
    for raw in raw_names:
        if not isinstance(raw, str):
            notes.append(f"dropped: non-string drug name {raw!r}")
            continue
        try:
            names.add(normalize_drug_name(raw, policy))
        except DrugCombError:
            notes.append("dropped: empty drug name")
    return names


def _read_combinations(
    items: Any, policy: NormalizationPolicy, notes: list[str]
) -> tuple[bool, frozenset[Combination]]:
    if isinstance(items, dict):
        notes.append("answer is a bare object, read as a one-element array")
        items = [items]
    if not isinstance(items, list):
        notes.append("answer JSON is not an array")
        return False, frozenset()

    combinations = set()
    for item in items:
        if not isinstance(item, dict):
            notes.append(f"dropped: non-object item {item!r}"[:200])
            continue
        raw_label = _first_key(item, LABEL_KEYS)
        try:
            label = parse_label(raw_label) if isinstance(raw_label, str) else None
        except DrugCombError:
            label = None
        if label is None:
            notes.append(f"dropped: unknown label {raw_label!r}"[:200])
            continue
        if label == EffectLabel.NO_COMB:
            notes.append("NO_COMB object read as empty set")
            continue
        raw_drugs = _first_key(item, DRUG_KEYS)
        if not isinstance(raw_drugs, list):
            notes.append("dropped: missing drug list")
            continue
        drugs = _normalize_names(raw_drugs, policy, notes)
        if len(drugs) < 2:
            notes.append("dropped: arity<2")
            continue
        combination = Combination(drugs=frozenset(drugs), label=label)
        if combination in combinations:
            notes.append("deduplicated repeated combination")
        combinations.add(combination)
    return True, frozenset(combinations)


def _read_entities(
    items: Any, policy: NormalizationPolicy, notes: list[str]
) -> tuple[bool, frozenset[str]]:
    if not isinstance(items, list):
        notes.append("NER region is not a JSON array")
        return False, frozenset()
    return True, frozenset(_normalize_names(items, policy, notes))


def parse_answer_payload(
    answer_text: str,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    mode: AnswerFormat = "standard",
) -> AnswerPayload:
    notes: list[str] = []

    if mode == "standard":
        ok, data = _load_json(answer_text)
        if not ok:
            notes.append("answer is not valid JSON")
            return AnswerPayload(frozenset(), None, False, notes)
        valid, combinations = _read_combinations(data, policy, notes)
        return AnswerPayload(combinations, None, valid, notes)

    entities = None
    ner_valid = False
    ner_match = NER_PATTERN.search(answer_text)
    if ner_match is None:
        notes.append("missing @ner#...#ner@ region")
    else:
        ok, data = _load_json(ner_match.group(1))
        if ok:
            ner_valid, found = _read_entities(data, policy, notes)
            if ner_valid:
                entities = found
        else:
            notes.append("NER region is not valid JSON")

    combinations: frozenset[Combination] = frozenset()
    re_valid = False
    re_match = RE_PATTERN.search(answer_text)
    if re_match is None:
        notes.append("missing @re#...#re@ region")
    else:
        ok, data = _load_json(re_match.group(1))
        if ok:
            re_valid, combinations = _read_combinations(data, policy, notes)
        else:
            notes.append("RE region is not valid JSON")

    return AnswerPayload(combinations, entities, ner_valid and re_valid, notes)


def parse_response(
    raw: str,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    mode: AnswerFormat = "standard",
) -> ParsedResponse:
    """Split a raw generation into think block, structure report and answer.

    Never raises: every problem is reported through flags and parse_notes.
    """
    if not isinstance(raw, str):
        raw = "" if raw is None else str(raw)
    notes: list[str] = []

    think_match = THINK_PATTERN.search(raw)
    think_text = think_match.group(1) if think_match else None
    if think_match is None:
        notes.append("no <think>...</think> pair")

    answer_matches = list(ANSWER_PATTERN.finditer(raw))
    if not answer_matches:
        notes.append("no <answer>...</answer> pair")
    elif len(answer_matches) > 1:
        notes.append(f"{len(answer_matches) - 1} extra <answer> block(s) ignored")

    combinations = None
    entities = None
    json_valid = False
    if answer_matches:
        answer_text = answer_matches[0].group(1)
        if "<answer>" in answer_text:
            notes.append("nested <answer> tag inside first answer block")
        payload = parse_answer_payload(answer_text, policy, mode)
        notes.extend(payload.notes)
        json_valid = payload.json_valid
        if json_valid:
            combinations = payload.combinations
            entities = payload.ner_entities

    return ParsedResponse(
        has_think=think_match is not None,
        has_answer=bool(answer_matches),
        think_text=think_text,
        think_report=analyze_think(think_text) if think_text is not None else None,
        combinations=combinations,
        ner_entities=entities,
        answer_json_valid=json_valid,
        parse_notes=notes,
    )


def render_answer(combinations, entities=None, mode: AnswerFormat = "standard") -> str:
    """Canonical answer body for the given combinations (and entity list)."""
    relations = serialize_combinations(combinations)
    if mode == "standard":
        return relations
    names = json.dumps(sorted(entities or ()), ensure_ascii=False)
    return f"@ner# {names} #ner@ @re# {relations} #re@"


class ResponseParser:
    def __init__(
        self,
        policy: NormalizationPolicy = DEFAULT_POLICY,
        answer_format: AnswerFormat = "standard",
    ):
        self.policy = policy
        self.answer_format = answer_format

    def parse(self, raw: str) -> ParsedResponse:
        return parse_response(raw, self.policy, self.answer_format)

    def parse_answer(self, answer_text: str) -> AnswerPayload:
        return parse_answer_payload(answer_text, self.policy, self.answer_format)
