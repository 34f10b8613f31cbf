"""``xmodal synth``: write a synthetic dataset, or run the overlap experiment."""

import argparse
import logging

from xmodal.cli.common import add_aug_argument, load_config, out_dir
from xmodal.core.config import settings
from xmodal.core.files import write_text_atomic
from xmodal.core.synthgen import (
    generate,
    overlap_experiment,
    render_overlap_report,
    write_dataset,
)

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "synth", parents=[common], help="generate a synthetic cross-modal dataset"
    )
    parser.add_argument("--classes", type=int, help="number of classes (synth.classes)")
    parser.add_argument(
        "--rho", type=float, help="overlapping pair fraction (synth.overlap_rho)"
    )
    parser.add_argument(
        "--experiment",
        action="store_true",
        help="train on the dataset and write the overlap experiment report",
    )
    add_aug_argument(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    extra = {}
    if args.classes is not None:
        extra["synth.classes"] = str(args.classes)
    if args.rho is not None:
        extra["synth.overlap_rho"] = str(args.rho)
    run_config = load_config(args, extra)
    target = out_dir(args)
    if args.experiment:
        report = overlap_experiment(
            run_config.synth, run_config.train, run_config.metric, settings.WORKERS
        )
        text = render_overlap_report(report)
        write_text_atomic(target / "overlap.tsv", text)
        print(text, end="")
        return 0
    encoder = None
    if any(key.startswith("encoder.") for key in run_config.provided):
        encoder = run_config.encoder
    dataset = generate(run_config.synth, encoder)
    manifest = write_dataset(dataset, target)
    print(
        f"wrote {len(dataset.images)} images and {len(dataset.texts)} texts "
        f"({run_config.synth.classes} classes) to {manifest}"
    )
    return 0
