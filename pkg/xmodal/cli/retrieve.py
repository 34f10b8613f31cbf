"""``xmodal retrieve``: ranked lists for one or both directions."""

import argparse
import logging
from pathlib import Path

from xmodal.cli.common import DIRECTIONS, load_config, out_dir
from xmodal.core.embeddings import load_embedding_set
from xmodal.core.retrieval import retrieve, write_ranked_lists

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "retrieve", parents=[common], help="rank galleries (writes ranked_<direction>.tsv)"
    )
    parser.add_argument("embeddings", type=Path, help="embedding TSV")
    parser.add_argument("--direction", choices=list(DIRECTIONS), default="both")
    parser.add_argument("--k-max", type=int, help="list length (run.k_max)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    extra = {"run.k_max": str(args.k_max)} if args.k_max is not None else {}
    run_config = load_config(args, extra)
    target = out_dir(args)
    embeddings = load_embedding_set(args.embeddings)
    k_max = run_config.run.k_max or run_config.metric.k_max
    for direction in DIRECTIONS[args.direction]:
        lists = retrieve(direction, embeddings, k_max)
        write_ranked_lists(lists, target / f"ranked_{direction.value}.tsv")
        print(f"{direction.value}: {len(lists)} ranked lists of up to {k_max} items")
    return 0
