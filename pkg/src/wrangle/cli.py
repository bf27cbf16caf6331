"""Command-line entry point: ``wrangle run`` and ``wrangle eval``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import STAGES, ConfigError
from .evaluate import EvaluationError, evaluate
from .ingest import IngestError, load_relation
from .model import ModelError, normalize_name
from .pipeline import run_pipeline

EXIT_OK, EXIT_FATAL, EXIT_CONFIG = 0, 1, 2


def _toggle(text: str) -> tuple[str, bool]:
    stage, sep, state = text.partition("=")
    if not sep or stage not in STAGES or state not in ("on", "off"):
        raise argparse.ArgumentTypeError(
            f"expected <stage>=<on|off> with stage in {', '.join(STAGES)}, got {text!r}"
        )
    return stage, state == "on"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wrangle", description="Context-informed data wrangling.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the wrangling pipeline from a JSON config")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", type=Path, default=Path("out"))
    run.add_argument("--toggle", action="append", type=_toggle, default=[], metavar="STAGE=on|off")
    run.add_argument("--seed", type=int)

    ev = sub.add_parser("eval", help="compare a result CSV with a ground-truth CSV")
    ev.add_argument("--result", required=True, type=Path)
    ev.add_argument("--truth", required=True, type=Path)
    ev.add_argument("--keys", required=True, help="comma-separated key attributes")
    ev.add_argument("--excluded-marker", default=None)
    return parser


def _diag(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "run":
            result = run_pipeline(args.config, args.out, dict(args.toggle), args.seed)
            summary = {"out": str(args.out), "tuples": result.report["output"]}
            if result.report.get("evaluation"):
                summary["evaluation"] = result.report["evaluation"]
            print(json.dumps(summary, sort_keys=True))
        else:
            keys = [normalize_name(k) for k in args.keys.split(",") if k.strip()]
            result_rel = load_relation(args.result, name="result")
            truth = load_relation(args.truth, name="ground_truth")
            marker = normalize_name(args.excluded_marker) if args.excluded_marker else None
            print(json.dumps(evaluate(result_rel, truth, keys, marker).as_dict(), sort_keys=True))
    except ConfigError as exc:
        _diag("config", str(exc))
        return EXIT_CONFIG
    except (IngestError, EvaluationError, ModelError, OSError) as exc:
        _diag("fatal", str(exc))
        return EXIT_FATAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
