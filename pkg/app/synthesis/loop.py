"""Analyst/Reviewer generation-review-feedback loop."""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

from pydantic import BaseModel, Field

from ..calculators.parser import THINK_PATTERN
from ..domain import Instance
from ..errors import BackendError, ReviewParseError
from .backend import ChatBackend, OpenAIChatBackend
from .review import CRITERIA, RubricScores, accept, parse_review
from .templates import NO_CONTEXT, NO_FEEDBACK, format_gold_labels, load_prompt, render_template

logger = logging.getLogger(__name__)

REASK_SUFFIX = (
    "\n\nYour previous reply could not be read. Reply again with only the JSON "
    "object described above, containing all six criteria."
)


class SynthesisConfig(BaseModel):
    max_iterations: int = Field(default=3, ge=1)
    accept_threshold: int = Field(default=4, ge=0, le=5)
    review_reasks: int = Field(default=1, ge=0)
    analyst_prompt_template: str = Field(default_factory=lambda: load_prompt("analyst.txt"))
    reviewer_prompt_template: str = Field(default_factory=lambda: load_prompt("reviewer.txt"))
    analyst_system_prompt: str = Field(default_factory=lambda: load_prompt("analyst_system.txt"))
    reviewer_system_prompt: str = Field(default_factory=lambda: load_prompt("reviewer_system.txt"))
    backend_endpoint: Optional[str] = None
    analyst_model: str = "gpt-4o"
    reviewer_model: str = "gpt-5.1"
    analyst_temperature: Optional[float] = None
    reviewer_temperature: Optional[float] = None
    request_timeout: float = Field(default=60.0, gt=0)
    retry_limit: int = Field(default=3, ge=0)
    backoff_base: float = Field(default=1.0, ge=0)
    max_concurrent_requests: int = Field(default=4, ge=1)


@dataclass
class SynthesisOutcome:
    instance_id: str
    status: Literal["accepted", "rejected"]
    iterations_used: int
    trace_text: Optional[str] = None
    final_scores: Optional[RubricScores] = None
    transcript: list[tuple[str, str]] = field(default_factory=list)
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "status": self.status,
            "iterations_used": self.iterations_used,
            "trace_text": self.trace_text,
            "final_scores": self.final_scores.to_dict() if self.final_scores else None,
            "transcript": [list(turn) for turn in self.transcript],
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SynthesisOutcome":
        scores = data.get("final_scores")
        return cls(
            instance_id=data["instance_id"],
            status=data["status"],
            iterations_used=data["iterations_used"],
            trace_text=data.get("trace_text"),
            final_scores=RubricScores.from_dict(scores) if scores else None,
            transcript=[tuple(turn) for turn in data.get("transcript") or []],
            error=data.get("error"),
        )


def make_backends(cfg: SynthesisConfig) -> tuple[ChatBackend, ChatBackend]:
    def build(model: str, temperature: Optional[float]) -> OpenAIChatBackend:
        return OpenAIChatBackend(
            model=model,
            temperature=temperature,
            endpoint=cfg.backend_endpoint,
            timeout=cfg.request_timeout,
            retry_limit=cfg.retry_limit,
            backoff_base=cfg.backoff_base,
        )

    return (
        build(cfg.analyst_model, cfg.analyst_temperature),
        build(cfg.reviewer_model, cfg.reviewer_temperature),
    )


def format_feedback(scores: RubricScores) -> str:
    lines = []
    for name in CRITERIA:
        comment = scores.comments.get(name)
        if comment:
            lines.append(f"- {name} ({getattr(scores, name)}/5): {comment}")
        else:
            lines.append(f"- {name} ({getattr(scores, name)}/5)")
    for name, comment in scores.comments.items():
        if name not in CRITERIA and comment:
            lines.append(f"- {name}: {comment}")
    return "\n".join(lines)


def clean_trace(text: str) -> str:
    """Drop a wrapping <think> block if the analyst added one."""
    match = THINK_PATTERN.search(text)
    return (match.group(1) if match else text).strip()


def _review(
    reviewer: ChatBackend, cfg: SynthesisConfig, prompt: str, transcript: list
) -> RubricScores:
    for attempt in range(cfg.review_reasks + 1):
        request = prompt if attempt == 0 else prompt + REASK_SUFFIX
        transcript.append(("reviewer_prompt", request))
        reply = reviewer(cfg.reviewer_system_prompt, request)
        transcript.append(("reviewer", reply))
        try:
            return parse_review(reply)
        except ReviewParseError:
            logger.warning("unreadable review (attempt %d)", attempt + 1)
    raise ReviewParseError(
        f"reviewer output unreadable after {cfg.review_reasks} re-ask(s)"
    )


def run_synthesis(
    instance: Instance,
    cfg: SynthesisConfig,
    backend: ChatBackend,
    reviewer_backend: Optional[ChatBackend] = None,
) -> SynthesisOutcome:
    """Draft, review and revise one reasoning trace until accepted or out of rounds.

    ``backend`` plays the analyst; ``reviewer_backend`` (default: the same
    callable) plays the reviewer. Calls within one run are sequential.
    """
    reviewer = reviewer_backend or backend
    values = {
        "sentence": instance.sentence,
        "context": instance.context or NO_CONTEXT,
        "gold_labels": format_gold_labels(instance.gold),
    }
    transcript: list[tuple[str, str]] = []
    feedback = NO_FEEDBACK
    scores = None
    trace = None

    for iteration in range(1, cfg.max_iterations + 1):
        analyst_prompt = render_template(cfg.analyst_prompt_template, feedback=feedback, **values)
        transcript.append(("analyst_prompt", analyst_prompt))
        draft = backend(cfg.analyst_system_prompt, analyst_prompt)
        transcript.append(("analyst", draft))
        trace = clean_trace(draft)

        reviewer_prompt = render_template(cfg.reviewer_prompt_template, trace=trace, **values)
        scores = _review(reviewer, cfg, reviewer_prompt, transcript)
        if accept(scores, cfg.accept_threshold):
            logger.info("instance %s accepted at iteration %d", instance.id, iteration)
            return SynthesisOutcome(
                instance_id=instance.id,
                status="accepted",
                iterations_used=iteration,
                trace_text=trace,
                final_scores=scores,
                transcript=transcript,
            )
        logger.info(
            "instance %s iteration %d below threshold: %s", instance.id, iteration, scores.as_dict()
        )
        feedback = format_feedback(scores)

    return SynthesisOutcome(
        instance_id=instance.id,
        status="rejected",
        iterations_used=cfg.max_iterations,
        trace_text=trace,
        final_scores=scores,
        transcript=transcript,
    )


def synthesize_corpus(
    instances: list[Instance],
    cfg: SynthesisConfig,
    backend: ChatBackend,
    reviewer_backend: Optional[ChatBackend] = None,
    sink: Optional[Callable[[SynthesisOutcome], None]] = None,
) -> list[SynthesisOutcome]:
    """Run every instance with at most ``max_concurrent_requests`` runs in flight.

    Outcomes come back in input order; ``sink`` sees each one as it finishes.
    An unreadable review rejects that instance; a BackendError aborts the run.
    """
    outcomes: list[Optional[SynthesisOutcome]] = [None] * len(instances)
    with ThreadPoolExecutor(max_workers=cfg.max_concurrent_requests) as pool:
        futures = {
            pool.submit(run_synthesis, instance, cfg, backend, reviewer_backend): i
            for i, instance in enumerate(instances)
        }
        try:
            for future in as_completed(futures):
                i = futures[future]
                try:
                    outcome = future.result()
                except ReviewParseError as exc:
                    outcome = SynthesisOutcome(
                        instance_id=instances[i].id,
                        status="rejected",
                        iterations_used=0,
                        error=str(exc),
                    )
                outcomes[i] = outcome
                if sink is not None:
                    sink(outcome)
        except BackendError:
            for future in futures:
                future.cancel()
            raise
    return outcomes
