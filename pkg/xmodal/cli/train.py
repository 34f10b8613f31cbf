"""``xmodal train``: fit the single-stream network on a manifest dataset."""

import argparse
import logging

from xmodal.cli.common import (
    add_aug_argument,
    add_dataset_arguments,
    load_config,
    load_dataset,
    out_dir,
)
from xmodal.core.config import settings
from xmodal.models.checkpoint import save_checkpoint, write_training_log
from xmodal.models.training import train

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "model.xmp"
LOG_NAME = "training_log.tsv"


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "train", parents=[common], help="train the network (writes model.xmp and training_log.tsv)"
    )
    add_dataset_arguments(parser)
    add_aug_argument(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    run_config = load_config(args)
    target = out_dir(args)
    items = load_dataset(run_config, settings.WORKERS)
    result = train(items, run_config.train, settings.WORKERS)
    save_checkpoint(result.params, target / CHECKPOINT_NAME)
    write_training_log(result.log, target / LOG_NAME)
    final = result.log[-1]
    print(
        f"trained {final.epoch} epochs on {len(items)} items; "
        f"final loss {final.losses.total:.4f}; checkpoint {target / CHECKPOINT_NAME}"
    )
    return 0
