"""``xmodal embed``: embed a manifest dataset with a trained checkpoint."""

import argparse
import logging
from pathlib import Path

from xmodal.cli.common import (
    add_aug_argument,
    add_dataset_arguments,
    load_config,
    load_dataset,
    out_dir,
)
from xmodal.core.config import settings
from xmodal.core.embeddings import save_embedding_set
from xmodal.models.checkpoint import load_checkpoint
from xmodal.models.training import embed_dataset

logger = logging.getLogger(__name__)

EMBEDDINGS_NAME = "embeddings.tsv"


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "embed", parents=[common], help="embed every item of a dataset (writes embeddings.tsv)"
    )
    parser.add_argument("checkpoint", type=Path, help="checkpoint written by 'train'")
    add_dataset_arguments(parser)
    add_aug_argument(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    run_config = load_config(args)
    target = out_dir(args)
    params = load_checkpoint(args.checkpoint)
    items = load_dataset(run_config, settings.WORKERS)
    embeddings = embed_dataset(
        params, items, run_config.train.augmentation, settings.WORKERS
    )
    save_embedding_set(embeddings, target / EMBEDDINGS_NAME)
    print(f"embedded {embeddings.total} items into {target / EMBEDDINGS_NAME}")
    return 0
