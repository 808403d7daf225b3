import json
import logging
import os
from pathlib import Path
from typing import Any, Mapping, Optional

from pydantic import BaseModel, Field

from .calculators.rewards import DEFAULT_EPSILON_STD, RewardWeights
from .domain import NormalizationPolicy, TaskMode
from .synthesis.loop import SynthesisConfig

# Gold combinations with at least this many drugs form the higher-order subset.
HIGHER_ORDER_MIN_DRUGS = 4

ENV_PREFIX = "DCRE_"
CONFIG_PATH_ENV = "DCRE_CONFIG"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

PROMPT_FIELDS = {
    "analyst_prompt_template",
    "reviewer_prompt_template",
    "analyst_system_prompt",
    "reviewer_system_prompt",
}


class NormalizationSettings(BaseModel):
    case_fold: bool = True
    trim_whitespace: bool = True
    collapse_internal_whitespace: bool = True
    strip_surrounding_punctuation: bool = True

    def policy(self) -> NormalizationPolicy:
        return NormalizationPolicy(**self.model_dump())


class Settings(BaseModel):
    host: str = "127.0.0.1"
    port: int = Field(default=8000, ge=1, le=65535)
    log_level: str = "INFO"
    mode: TaskMode = "drugcomb"
    extended: bool = False
    epsilon_std: float = Field(default=DEFAULT_EPSILON_STD, gt=0)
    higher_order_min_drugs: int = Field(default=HIGHER_ORDER_MIN_DRUGS, ge=3)
    normalization: NormalizationSettings = Field(default_factory=NormalizationSettings)
    weights: RewardWeights = Field(default_factory=RewardWeights)
    synthesis: SynthesisConfig = Field(default_factory=SynthesisConfig)

    @property
    def policy(self) -> NormalizationPolicy:
        return self.normalization.policy()

    def public_dict(self) -> dict:
        """Settings without the (long) prompt texts."""
        return self.model_dump(exclude={"synthesis": PROMPT_FIELDS})


def _merge(base: dict, extra: Mapping[str, Any]) -> dict:
    merged = dict(base)
    for key, value in extra.items():
        if value is None:
            continue
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _env_overrides(environ: Mapping[str, str]) -> dict:
    data: dict = {}
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX) or key == CONFIG_PATH_ENV:
            continue
        path = key[len(ENV_PREFIX):].lower().split("__")
        node = data
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value
    return data


def load_settings(
    config_path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> Settings:
    environ = os.environ if environ is None else environ
    config_path = config_path or environ.get(CONFIG_PATH_ENV)

    data: dict = {}
    if config_path:
        with open(config_path, encoding="utf-8") as f:
            data = json.load(f)
    data = _merge(data, _env_overrides(environ))
    data = _merge(data, overrides or {})
    return Settings.model_validate(data)


def configure_logging(level: str = "INFO") -> None:
    logging.basicConfig(format=LOG_FORMAT)
    logging.getLogger().setLevel(level.upper())
