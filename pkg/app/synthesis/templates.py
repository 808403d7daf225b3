import re
from functools import lru_cache
from pathlib import Path

from ..domain import serialize_combinations

PROMPTS_DIR = Path(__file__).resolve().parent.parent / "prompts"

PLACEHOLDER_PATTERN = re.compile(r"\{(sentence|context|gold_labels|feedback|trace)\}")
NO_FEEDBACK = "None, this is the first draft."
NO_CONTEXT = "(no surrounding paragraph)"


@lru_cache(maxsize=None)
def load_prompt(name: str) -> str:
    return (PROMPTS_DIR / name).read_text(encoding="utf-8").strip()


def render_template(template: str, **values: str) -> str:
    """Fill the known {placeholders}; every other brace is left untouched."""
    return PLACEHOLDER_PATTERN.sub(lambda m: values.get(m.group(1), m.group(0)), template)


def format_gold_labels(gold) -> str:
    text = serialize_combinations(gold)
    return f"{text} (NO_COMB)" if not gold else text
