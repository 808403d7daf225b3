import json
from dataclasses import dataclass
from pathlib import Path

from ..calculators.parser import render_answer
from ..domain import Instance
from .loop import SynthesisOutcome
from .templates import load_prompt


@dataclass(frozen=True)
class SftSummary:
    total: int
    accepted: int

    @property
    def acceptance_rate(self) -> float:
        return 100 * self.accepted / self.total if self.total else 0.0

    @property
    def acceptance_rate_text(self) -> str:
        return f"{self.acceptance_rate:.2f}%"

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "accepted": self.accepted,
            "acceptance_rate": self.acceptance_rate_text,
        }


def build_input(instance: Instance, with_entities: bool = False) -> str:
    parts = [f"Target sentence: {instance.sentence}"]
    if instance.context:
        parts.append(f"Surrounding paragraph: {instance.context}")
    if with_entities and instance.entity_hints:
        parts.append(f"Drug entities: {', '.join(sorted(instance.entity_hints))}")
    return "\n".join(parts)


def build_sft_dataset(
    outcomes: list[SynthesisOutcome],
    instances: list[Instance],
    extended: bool = False,
    with_entities: bool = False,
) -> tuple[list[dict], SftSummary]:
    """Instruction-tuning records for the accepted traces, plus the acceptance summary."""
    by_id = {instance.id: instance for instance in instances}
    instruction = load_prompt("instruction_extended.txt" if extended else "instruction.txt")
    answer_format = "extended" if extended else "standard"

    records = []
    for outcome in outcomes:
        if outcome.status != "accepted":
            continue
        instance = by_id[outcome.instance_id]
        answer = render_answer(instance.gold, instance.entity_hints, answer_format)
        records.append(
            {
                "id": instance.id,
                "instruction": instruction,
                "input": build_input(instance, with_entities),
                "output": f"<think>\n{outcome.trace_text}\n</think>\n<answer>{answer}</answer>",
            }
        )
    return records, SftSummary(total=len(outcomes), accepted=len(records))


def write_jsonl(records, path) -> None:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8") as f:
            for record in records:
                f.write(json.dumps(record, ensure_ascii=False) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
