import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from .config import Settings, configure_logging, load_settings
from .datasets import (
    compute_stats,
    export_canonical,
    format_stats_table,
    load_canonical,
    load_ddi13,
    load_drugcomb,
    stats_to_json,
)
from .domain import Instance
from .errors import BackendError, DrugCombError
from .handlers import evaluate_instances, handle_group_score, handle_score
from .models import EvaluateResponse, GroupScoreRequest, ScoreRequest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_corpus(path, fmt: str, settings: Settings) -> list[Instance]:
    if fmt == "canonical":
        return load_canonical(path, settings.policy)
    if settings.mode == "ddi13":
        return load_ddi13(path, settings.policy)
    return load_drugcomb(path, settings.policy)


def format_report(report: EvaluateResponse) -> str:
    rows = [("metric", "P", "R", "F1")]
    for name, entry in report.metrics.items():
        rows.append((name, *(f"{v:.4f}" for v in (entry.scores.precision, entry.scores.recall, entry.scores.f1))))
    if report.ner is not None:
        rows.append(("ner", *(f"{v:.4f}" for v in (report.ner.precision, report.ner.recall, report.ner.f1))))
    for name, entry in report.subsets.items():
        if entry is None:
            rows.append((name, "-", "-", "-"))
        else:
            rows.append((name, *(f"{v:.4f}" for v in (entry.scores.precision, entry.scores.recall, entry.scores.f1))))
    width = max(len(row[0]) for row in rows)
    lines = [f"mode: {report.mode}  instances: {report.instances}"]
    lines += [f"{row[0].ljust(width)}  " + "  ".join(c.rjust(6) for c in row[1:]) for row in rows]
    return "\n".join(lines)


def cmd_eval(args, settings: Settings) -> int:
    gold = load_corpus(args.gold, args.gold_format, settings)
    predictions = load_canonical(args.predictions, settings.policy)
    report = evaluate_instances(predictions, gold, settings.mode, settings.higher_order_min_drugs)
    print(report.model_dump_json(indent=2) if args.json else format_report(report))
    return EXIT_OK


def _read_text(value: Optional[str], path: Optional[str]) -> str:
    if value is not None:
        return value
    if path is not None:
        return Path(path).read_text(encoding="utf-8")
    return sys.stdin.read()


def _read_json(value: str):
    """Inline JSON, or @path for a file."""
    if value.startswith("@"):
        value = Path(value[1:]).read_text(encoding="utf-8")
    try:
        return json.loads(value)
    except ValueError as exc:
        raise UsageError(f"not valid JSON: {exc}") from exc


def cmd_reward(args, settings: Settings) -> int:
    gold = _read_json(args.gold)
    text = _read_text(args.response, args.response_file)
    common = {"gold": gold, "mode": settings.mode, "extended": settings.extended}
    if args.group:
        try:
            responses = json.loads(text)
        except ValueError as exc:
            raise UsageError(f"--group expects a JSON array of responses: {exc}") from exc
        result = handle_group_score(GroupScoreRequest(responses=responses, **common), settings)
    else:
        result = handle_score(ScoreRequest(response_text=text, **common), settings)
    print(result.model_dump_json(indent=2))
    return EXIT_OK


def cmd_serve(args, settings: Settings) -> int:
    import uvicorn

    from .main import create_app

    uvicorn.run(create_app(settings), host=settings.host, port=settings.port)
    return EXIT_OK


def cmd_synthesize(args, settings: Settings) -> int:
    from .synthesis.loop import make_backends, synthesize_corpus
    from .synthesis.sft import build_sft_dataset, write_jsonl

    instances = load_corpus(args.input, args.input_format, settings)
    if args.limit is not None:
        instances = instances[: args.limit]
    analyst, reviewer = make_backends(settings.synthesis)

    with open(args.outcomes, "w", encoding="utf-8") as sink_file:
        def sink(outcome):
            sink_file.write(json.dumps(outcome.to_dict(), ensure_ascii=False) + "\n")
            sink_file.flush()

        outcomes = synthesize_corpus(instances, settings.synthesis, analyst, reviewer, sink=sink)

    records, summary = build_sft_dataset(
        outcomes, instances, extended=settings.extended, with_entities=args.with_entities
    )
    write_jsonl(records, args.sft)
    print(json.dumps(summary.to_dict()))
    return EXIT_OK


def cmd_stats(args, settings: Settings) -> int:
    stats = {}
    for item in args.split:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise UsageError(f"--split expects NAME=PATH, got {item!r}")
        stats[name] = compute_stats(load_corpus(path, args.format, settings), settings.mode)
    print(stats_to_json(stats) if args.json else format_stats_table(stats))
    return EXIT_OK


def cmd_convert(args, settings: Settings) -> int:
    instances = load_corpus(args.input, "source", settings)
    export_canonical(instances, args.output)
    logger.info("wrote %d canonical records to %s", len(instances), args.output)
    return EXIT_OK


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="python -m app", description=__doc__)
    parser.add_argument("--config", help="JSON config file (default: $DCRE_CONFIG)")
    parser.add_argument("--log-level", dest="log_level", help="logging level (default INFO)")
    parser.add_argument("--mode", choices=["drugcomb", "ddi13"], help="task mode")
    parser.add_argument(
        "--extended", action="store_true", default=None, help="joint NER+RE answer format"
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("eval", help="corpus metrics for a prediction file")
    p.add_argument("--gold", required=True)
    p.add_argument("--predictions", required=True, help="canonical JSON-lines predictions")
    p.add_argument("--gold-format", choices=["canonical", "source"], default="canonical")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reward", help="score one response (or a group) against gold")
    p.add_argument("--gold", required=True, help="JSON array of combinations, or @file")
    p.add_argument("--response", help="response text (default: stdin)")
    p.add_argument("--response-file")
    p.add_argument("--group", action="store_true", help="input is a JSON array of responses")
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synthesize", help="generate reviewed reasoning traces and SFT data")
    p.add_argument("--input", required=True)
    p.add_argument("--input-format", choices=["canonical", "source"], default="canonical")
    p.add_argument("--outcomes", required=True, help="JSON-lines outcome file")
    p.add_argument("--sft", required=True, help="JSON-lines SFT file")
    p.add_argument("--with-entities", action="store_true")
    p.add_argument("--limit", type=int)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("stats", help="dataset statistics per split")
    p.add_argument("--split", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--format", choices=["canonical", "source"], default="source")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("convert", help="source dataset to canonical JSON-lines")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_convert)

    return parser


def _overrides(args) -> dict:
    keys = ("log_level", "mode", "extended", "host", "port")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = load_settings(args.config, _overrides(args))
    except (OSError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    configure_logging(settings.log_level)

    try:
        return args.func(args, settings)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except DrugCombError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValidationError as exc:
        print(f"error [SchemaViolation]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
