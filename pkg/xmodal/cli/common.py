"""Arguments and helpers shared by the subcommands."""

import argparse
import logging
from pathlib import Path
from typing import Optional

from xmodal.core.dataset import load_canvases, read_encoder_config, read_manifest
from xmodal.core.encoder import load_vocabulary
from xmodal.core.exceptions import ConfigError
from xmodal.core.runconfig import load_run_config
from xmodal.schemas.dataset import LabeledCanvas
from xmodal.schemas.embedding import Modality
from xmodal.schemas.metrics import ReportScale
from xmodal.schemas.retrieval import Direction
from xmodal.schemas.run import RunConfig
from xmodal.schemas.training import Augmentation

logger = logging.getLogger(__name__)

DIRECTIONS = {
    "i2t": (Direction.IMAGE_TO_TEXT,),
    "t2i": (Direction.TEXT_TO_IMAGE,),
    "both": (Direction.IMAGE_TO_TEXT, Direction.TEXT_TO_IMAGE),
}


def common_parser() -> argparse.ArgumentParser:
    """Flags every subcommand accepts."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", type=Path, help="run configuration file (key=value)")
    parser.add_argument("--seed", type=int, help="root seed; stage seeds derive from it")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="override the configured log level",
    )
    return parser


def add_metric_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", help="comma-separated K values, e.g. 1,5,10")
    parser.add_argument("--scale", choices=[s.value for s in ReportScale])
    parser.add_argument(
        "--exclude-pairs",
        action="store_true",
        default=None,
        help="add λ@K computed outside the query's own pair group",
    )
    parser.add_argument("--direction", choices=list(DIRECTIONS), default="both")
    parser.add_argument(
        "--references",
        action="store_true",
        help="show published reference scores beneath the table",
    )


def add_dataset_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", type=Path, help="dataset manifest TSV")
    parser.add_argument("--vocab", type=Path, help="word-vector vocabulary file")
    parser.add_argument("--images", type=Path, help="base directory of image paths")


def add_aug_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--aug", choices=[a.value for a in Augmentation])


def flag_overrides(args: argparse.Namespace) -> dict[str, str]:
    """Config keys set by command-line flags."""
    overrides: dict[str, Optional[str]] = {
        "metric.ks": getattr(args, "k", None),
        "metric.report_scale": getattr(args, "scale", None),
        "train.augmentation": getattr(args, "aug", None),
        "run.manifest": _str(getattr(args, "manifest", None)),
        "run.vocab": _str(getattr(args, "vocab", None)),
        "run.images": _str(getattr(args, "images", None)),
    }
    if getattr(args, "exclude_pairs", None):
        overrides["metric.exclude_pairs"] = "true"
    return {k: v for k, v in overrides.items() if v is not None}


def _str(value: Optional[Path]) -> Optional[str]:
    return None if value is None else str(value)


def load_config(
    args: argparse.Namespace, extra: Optional[dict[str, str]] = None
) -> RunConfig:
    overrides = flag_overrides(args)
    overrides.update(extra or {})
    return load_run_config(args.config, overrides, args.seed)


def out_dir(args: argparse.Namespace) -> Path:
    """The ``--out`` directory, created if needed.

    Raises:
        ConfigError: ``--out`` was not given.
    """
    if args.out is None:
        raise ConfigError(f"'{args.command}' needs --out DIR", key="--out")
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def require_path(value: Optional[Path], key: str) -> Path:
    if value is None:
        raise ConfigError(f"missing '{key}' (set it in the config or by flag)", key=key)
    return value


def load_dataset(run_config: RunConfig, workers: int = 1) -> list[LabeledCanvas]:
    """Canvases of the manifest named by ``run.manifest``."""
    manifest = require_path(run_config.run.manifest, "run.manifest")
    entries = read_manifest(manifest)
    vocab = None
    if any(e.modality == Modality.TEXT for e in entries):
        vocab = load_vocabulary(require_path(run_config.run.vocab, "run.vocab"))
    encoder = run_config.encoder
    if not any(key.startswith("encoder.") for key in run_config.provided):
        encoder = read_encoder_config(manifest.parent) or encoder
    base = run_config.run.images or manifest.parent
    return load_canvases(entries, vocab, encoder, base, workers)
