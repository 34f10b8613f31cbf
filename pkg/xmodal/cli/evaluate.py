"""``xmodal evaluate``: R@K, λ@K and pair-excluded λ@K of an embedding set."""

import argparse
import logging
from pathlib import Path

from xmodal.cli.common import DIRECTIONS, add_metric_arguments, load_config
from xmodal.core.embeddings import load_embedding_set
from xmodal.core.files import write_text_atomic
from xmodal.core.metrics import evaluate
from xmodal.core.report import render_report

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "evaluate", parents=[common], help="score an embedding set in both directions"
    )
    parser.add_argument("embeddings", type=Path, help="embedding TSV")
    parser.add_argument("--tsv", type=Path, help="also write the report as TSV here")
    add_metric_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    run_config = load_config(
        args, {"metric.exclude_pairs": "true" if args.exclude_pairs else "false"}
    )
    embeddings = load_embedding_set(args.embeddings)
    reports = evaluate(embeddings, run_config.metric, DIRECTIONS[args.direction])
    ordered = list(reports.values())
    print(render_report(ordered, "aligned_table", references=args.references), end="")
    tsv_path = args.tsv or (args.out / "report.tsv" if args.out else None)
    if tsv_path is not None:
        write_text_atomic(tsv_path, render_report(ordered, "tsv"))
        logger.info(f"Wrote report to {tsv_path}")
    return 0
