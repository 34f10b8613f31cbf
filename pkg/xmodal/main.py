import argparse
import logging
import sys
from typing import Optional, Sequence

from xmodal import __version__
from xmodal.cli import (
    embed,
    encode,
    evaluate,
    pipeline,
    project,
    retrieve,
    synth,
    train,
)
from xmodal.cli.common import common_parser
from xmodal.core.config import settings
from xmodal.core.exceptions import XModalError

logger = logging.getLogger(__name__)

COMMANDS = (encode, synth, train, embed, retrieve, evaluate, project, pipeline)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xmodal",
        description="Cross-modal retrieval engine and evaluation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = common_parser()
    for command in COMMANDS:
        command.register(subparsers, common)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the ``xmodal`` command.

    Returns:
        int: ``0`` on success, ``1`` on runtime or metric failures, ``2`` on
        usage and validation failures.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level or settings.LOG_LEVEL, format=settings.LOG_FORMAT
    )
    if args.log_level:
        logging.getLogger().setLevel(args.log_level)
    try:
        return args.handler(args)
    except XModalError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"xmodal {args.command}: error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
