"""``xmodal encode``: render the captions of a manifest as encoded-text images."""

import argparse
import logging

from xmodal.cli.common import add_dataset_arguments, load_config, out_dir, require_path
from xmodal.core.config import settings
from xmodal.core.dataset import read_manifest
from xmodal.core.encoder import (
    encode_descriptions,
    export_png,
    load_vocabulary,
    tokenize,
    write_ppm,
)
from xmodal.schemas.embedding import Modality

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "encode", parents=[common], help="encode captions as images (one PPM per caption)"
    )
    add_dataset_arguments(parser)
    parser.add_argument("--png", action="store_true", help="also write a PNG per caption")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    run_config = load_config(args)
    target = out_dir(args)
    vocab = load_vocabulary(require_path(run_config.run.vocab, "run.vocab"))
    entries = [
        e
        for e in read_manifest(require_path(run_config.run.manifest, "run.manifest"))
        if e.modality == Modality.TEXT
    ]
    images = encode_descriptions(
        [tokenize(e.value) for e in entries], vocab, run_config.encoder, settings.WORKERS
    )
    oov = [token for image in images for token in image.oov_tokens]
    for entry, image in zip(entries, images):
        write_ppm(image.pixels, target / f"{entry.id}.ppm")
        if args.png:
            export_png(image.pixels, target / f"{entry.id}.png")
    print(
        f"encoded {len(images)} captions into {target}; "
        f"{len(oov)} out-of-vocabulary tokens ({len(set(oov))} distinct)"
    )
    return 0
