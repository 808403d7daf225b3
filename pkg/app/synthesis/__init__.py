from .loop import SynthesisConfig, SynthesisOutcome, run_synthesis, synthesize_corpus
from .review import RubricScores, accept, parse_review
from .sft import build_sft_dataset

__all__ = [
    "SynthesisConfig",
    "SynthesisOutcome",
    "run_synthesis",
    "synthesize_corpus",
    "RubricScores",
    "accept",
    "parse_review",
    "build_sft_dataset",
]
