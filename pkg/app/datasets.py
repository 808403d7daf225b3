import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterator, Optional

from .domain import (
    DEFAULT_POLICY,
    Combination,
    EffectLabel,
    Instance,
    NormalizationPolicy,
    TaskMode,
    combination_from_record,
    normalize_drug_name,
    sort_combinations,
)
from .errors import ArityViolationError, DatasetParseError, DrugCombError, DuplicateIdError

logger = logging.getLogger(__name__)

FIELD_MAPS_PATH = Path(__file__).parent / "data" / "field_maps.json"

ARITY_BUCKETS = ("2", "3", "4", "5+")
DOC_BUCKETS = ("no_relation", "one_relation", "multi_relation")
RELATION_ORDER = {
    "drugcomb": (EffectLabel.POS, EffectLabel.NEG, EffectLabel.COMB),
    "ddi13": (EffectLabel.ADVICE, EffectLabel.EFFECT, EffectLabel.INT, EffectLabel.MECHANISM),
}

TABLE_ROW_NAMES = {
    "no_relation": "No relation",
    "one_relation": "One relation",
    "multi_relation": "More than one relation",
    "POS": "POS_COMB",
    "NEG": "NEG_COMB",
    "COMB": "COMB",
    "2": "Binary",
    "3": "3-ary",
    "4": "4-ary",
    "5+": "5-ary or more",
    "sentences": "# Sentences",
    "ADVICE": "Adv",
    "EFFECT": "Eff",
    "INT": "Int",
    "MECHANISM": "Mec",
}


@lru_cache(maxsize=None)
def _load_field_maps(path: str) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def field_map(corpus: str, path: Optional[Path] = None) -> dict:
    return _load_field_maps(str(path or FIELD_MAPS_PATH))[corpus]


def _read_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except ValueError as exc:
                raise DatasetParseError(str(path), line_no, "<json>", str(exc)) from exc
            if not isinstance(record, dict):
                raise DatasetParseError(str(path), line_no, "<record>", "expected a JSON object")
            yield line_no, record


def _require(record: dict, key: str, path: Path, line_no: int, kind: Any = str) -> Any:
    if key not in record:
        raise DatasetParseError(str(path), line_no, key, "missing")
    value = record[key]
    if not isinstance(value, kind):
        kinds = kind if isinstance(kind, tuple) else (kind,)
        expected = " or ".join(k.__name__ for k in kinds)
        raise DatasetParseError(str(path), line_no, key, f"expected {expected}")
    return value


def _normalize(raw: Any, policy: NormalizationPolicy, path: Path, line_no: int, key: str) -> str:
    if not isinstance(raw, str):
        raise DatasetParseError(str(path), line_no, key, "mention text must be a string")
    try:
        return normalize_drug_name(raw, policy)
    except DrugCombError as exc:
        raise DatasetParseError(str(path), line_no, key, str(exc)) from exc


def _mention_names(
    mentions: list, id_key: str, text_key: str, policy: NormalizationPolicy, path: Path, line_no: int
) -> dict:
    names = {}
    surfaces: dict[str, set[str]] = {}
    for mention in mentions:
        if not isinstance(mention, dict) or id_key not in mention or text_key not in mention:
            raise DatasetParseError(str(path), line_no, id_key, "malformed mention record")
        name = _normalize(mention[text_key], policy, path, line_no, text_key)
        names[mention[id_key]] = name
        surfaces.setdefault(name, set()).add(mention[text_key])
    for name, texts in surfaces.items():
        if len(texts) > 1:
            logger.warning(
                "%s:%d: distinct mentions %s normalize to %r", path, line_no, sorted(texts), name
            )
    return names


def _check_unique(instance_id: str, seen: set, path: Path, line_no: int) -> None:
    if instance_id in seen:
        raise DuplicateIdError(f"{path}:{line_no}: duplicate id {instance_id!r}")
    seen.add(instance_id)


def load_drugcomb(
    path, policy: NormalizationPolicy = DEFAULT_POLICY, field_maps: Optional[Path] = None
) -> list[Instance]:
    """One Instance per document; relation span ids resolve to drug-name sets."""
    path = Path(path)
    fm = field_map("drugcomb", field_maps)
    class_map = fm["class_map"]
    instances = []
    seen: set[str] = set()

    for line_no, record in _read_jsonl(path):
        instance_id = str(_require(record, fm["id"], path, line_no, (str, int)))
        _check_unique(instance_id, seen, path, line_no)
        sentence = _require(record, fm["sentence"], path, line_no)
        context = record.get(fm["context"])
        spans = _require(record, fm["spans"], path, line_no, list)
        names = _mention_names(spans, fm["span_id"], fm["span_text"], policy, path, line_no)

        gold = set()
        for relation in _require(record, fm["relations"], path, line_no, list):
            if not isinstance(relation, dict):
                raise DatasetParseError(str(path), line_no, fm["relations"], "expected objects")
            raw_class = relation.get(fm["relation_class"])
            if raw_class not in class_map:
                raise DatasetParseError(
                    str(path), line_no, fm["relation_class"], f"unknown class {raw_class!r}"
                )
            if class_map[raw_class] is None:
                continue
            span_ids = relation.get(fm["relation_spans"])
            if not isinstance(span_ids, list) or any(s not in names for s in span_ids):
                raise DatasetParseError(
                    str(path), line_no, fm["relation_spans"], f"unresolvable span ids {span_ids!r}"
                )
            drugs = frozenset(names[s] for s in span_ids)
            if len(drugs) < 2:
                logger.warning(
                    "%s:%d: relation over %s collapses to fewer than 2 drugs, skipped",
                    path, line_no, span_ids,
                )
                continue
            gold.add(Combination(drugs=drugs, label=EffectLabel(class_map[raw_class])))

        instances.append(
            Instance(
                id=instance_id,
                sentence=sentence,
                context=context if isinstance(context, str) else None,
                gold=frozenset(gold),
                entity_hints=frozenset(names.values()),
                task_mode="drugcomb",
            )
        )
    logger.info("loaded %d DrugComb instances from %s", len(instances), path)
    return instances


def load_ddi13(
    path, policy: NormalizationPolicy = DEFAULT_POLICY, field_maps: Optional[Path] = None
) -> list[Instance]:
    """One Instance per sentence; gold is the set of typed binary pairs."""
    path = Path(path)
    fm = field_map("ddi13", field_maps)
    type_map = {k.lower(): v for k, v in fm["type_map"].items()}
    instances = []
    seen: set[str] = set()

    for line_no, record in _read_jsonl(path):
        instance_id = str(_require(record, fm["id"], path, line_no, (str, int)))
        _check_unique(instance_id, seen, path, line_no)
        sentence = _require(record, fm["sentence"], path, line_no)
        entities = _require(record, fm["entities"], path, line_no, list)
        names = _mention_names(entities, fm["entity_id"], fm["entity_text"], policy, path, line_no)

        gold = set()
        for pair in record.get(fm["pairs"]) or []:
            if not isinstance(pair, dict):
                raise DatasetParseError(str(path), line_no, fm["pairs"], "expected objects")
            raw_type = str(pair.get(fm["pair_type"], "")).lower()
            if raw_type not in type_map:
                raise DatasetParseError(
                    str(path), line_no, fm["pair_type"], f"unknown type {raw_type!r}"
                )
            if type_map[raw_type] is None:
                continue
            members = pair.get(fm["pair_entities"])
            if not isinstance(members, list):
                raise DatasetParseError(str(path), line_no, fm["pair_entities"], "expected a list")
            if len(members) != 2:
                raise ArityViolationError(
                    f"{path}:{line_no}: pair lists {len(members)} entities, expected 2"
                )
            if any(m not in names for m in members):
                raise DatasetParseError(
                    str(path), line_no, fm["pair_entities"], f"unresolvable entity ids {members!r}"
                )
            drugs = frozenset(names[m] for m in members)
            if len(drugs) < 2:
                logger.warning(
                    "%s:%d: pair %s names the same drug twice, skipped", path, line_no, members
                )
                continue
            gold.add(Combination(drugs=drugs, label=EffectLabel(type_map[raw_type])))

        instances.append(
            Instance(
                id=instance_id,
                sentence=sentence,
                gold=frozenset(gold),
                entity_hints=frozenset(names.values()),
                task_mode="ddi13",
            )
        )
    logger.info("loaded %d DDI13 instances from %s", len(instances), path)
    return instances


def instance_to_record(instance: Instance) -> dict:
    return {
        "id": instance.id,
        "sentence": instance.sentence,
        "context": instance.context,
        "mode": instance.task_mode,
        "gold": [c.to_record() for c in sort_combinations(instance.gold)],
        "entities": sorted(instance.entity_hints) if instance.entity_hints is not None else None,
    }


def instance_from_record(record: dict, policy: NormalizationPolicy = DEFAULT_POLICY) -> Instance:
    entities = record.get("entities")
    return Instance(
        id=str(record["id"]),
        sentence=record.get("sentence", ""),
        context=record.get("context"),
        gold=frozenset(combination_from_record(c, policy) for c in record.get("gold") or []),
        entity_hints=(
            frozenset(normalize_drug_name(e, policy) for e in entities)
            if entities is not None
            else None
        ),
        task_mode=record.get("mode", "drugcomb"),
    )


def export_canonical(instances, path) -> None:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8") as f:
            for instance in instances:
                f.write(json.dumps(instance_to_record(instance), ensure_ascii=False) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write canonical file {path}: {exc}") from exc


def load_canonical(path, policy: NormalizationPolicy = DEFAULT_POLICY) -> list[Instance]:
    path = Path(path)
    instances = []
    seen: set[str] = set()
    for line_no, record in _read_jsonl(path):
        for key in ("id", "gold"):
            if key not in record:
                raise DatasetParseError(str(path), line_no, key, "missing")
        try:
            instance = instance_from_record(record, policy)
        except (KeyError, TypeError) as exc:
            raise DatasetParseError(str(path), line_no, "gold", f"malformed combination: {exc}") from exc
        except DrugCombError as exc:
            if isinstance(exc, ArityViolationError):
                raise
            raise DatasetParseError(str(path), line_no, "gold", str(exc)) from exc
        _check_unique(instance.id, seen, path, line_no)
        instances.append(instance)
    return instances


@dataclass
class CorpusStats:
    mode: TaskMode
    sentence_count: int = 0
    doc_counts: dict[str, int] = field(default_factory=dict)
    relation_counts: dict[str, int] = field(default_factory=dict)
    arity_counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _arity_bucket(size: int) -> str:
    return str(size) if size < 5 else "5+"


def compute_stats(instances, mode: TaskMode = "drugcomb") -> CorpusStats:
    docs = Counter()
    relations = Counter()
    arities = Counter()
    count = 0
    for instance in instances:
        count += 1
        n = len(instance.gold)
        docs["no_relation" if n == 0 else "one_relation" if n == 1 else "multi_relation"] += 1
        for combination in instance.gold:
            relations[combination.label.value] += 1
            arities[_arity_bucket(len(combination.drugs))] += 1

    return CorpusStats(
        mode=mode,
        sentence_count=count,
        doc_counts={k: docs[k] for k in DOC_BUCKETS},
        relation_counts={label.value: relations[label.value] for label in RELATION_ORDER[mode]},
        arity_counts={k: arities[k] for k in ARITY_BUCKETS},
    )


def _stat_rows(stats: CorpusStats) -> list[tuple[str, int]]:
    if stats.mode == "ddi13":
        rows = [("sentences", stats.sentence_count)]
        rows += list(stats.relation_counts.items())
        return rows
    return (
        list(stats.doc_counts.items())
        + list(stats.relation_counts.items())
        + list(stats.arity_counts.items())
    )


def format_stats_table(stats_by_split: dict[str, CorpusStats]) -> str:
    splits = list(stats_by_split)
    columns = [dict(_stat_rows(stats_by_split[s])) for s in splits]
    keys = [key for key, _ in _stat_rows(stats_by_split[splits[0]])] if splits else []

    header = ["Statistic"] + [s.capitalize() for s in splits] + ["Total"]
    rows = [header]
    for key in keys:
        values = [col.get(key, 0) for col in columns]
        rows.append([TABLE_ROW_NAMES.get(key, key)] + [str(v) for v in values] + [str(sum(values))])

    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells))
        if i == 0:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines)


def stats_to_json(stats_by_split: dict[str, CorpusStats]) -> str:
    return json.dumps({split: s.to_dict() for split, s in stats_by_split.items()}, indent=2)
