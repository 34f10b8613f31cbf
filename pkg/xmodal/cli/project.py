"""``xmodal project``: 2-D projection dump for external plotting."""

import argparse
from pathlib import Path

from xmodal.cli.common import load_config, out_dir
from xmodal.core.embeddings import load_embedding_set
from xmodal.core.projection import project_2d, write_projection


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "project", parents=[common], help="write a 2-D PCA projection (projection.tsv)"
    )
    parser.add_argument("embeddings", type=Path, help="embedding TSV")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    load_config(args)
    target = out_dir(args)
    points = project_2d(load_embedding_set(args.embeddings))
    write_projection(points, target / "projection.tsv")
    print(f"projected {len(points)} items into {target / 'projection.tsv'}")
    return 0
