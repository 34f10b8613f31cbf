"""``xmodal pipeline``: encode → train → embed → retrieve → evaluate in one run.

Artifacts written to ``--out``::

    dataset/            synthetic dataset (synth source only)
    model.xmp           checkpoint
    training_log.tsv    loss per epoch
    embeddings.tsv      every item embedded with the saved checkpoint
    ranked_i2t.tsv      ranked lists, image queries
    ranked_t2i.tsv      ranked lists, text queries
    report.tsv          metric report (machine readable)
    report.txt          metric report (aligned table)
"""

import argparse
import logging
from contextlib import contextmanager

from xmodal.cli.common import (
    DIRECTIONS,
    add_aug_argument,
    add_metric_arguments,
    load_config,
    load_dataset,
    out_dir,
)
from xmodal.cli.embed import EMBEDDINGS_NAME
from xmodal.cli.train import CHECKPOINT_NAME, LOG_NAME
from xmodal.core.config import settings
from xmodal.core.embeddings import save_embedding_set
from xmodal.core.exceptions import StageError
from xmodal.core.files import write_text_atomic
from xmodal.core.metrics import evaluate_ranked
from xmodal.core.report import render_report
from xmodal.core.retrieval import retrieve, truncate, write_ranked_lists
from xmodal.core.runconfig import PIPELINE_REQUIRED, require_keys
from xmodal.core.synthgen import generate, materialize, write_dataset
from xmodal.models.checkpoint import (
    load_checkpoint,
    save_checkpoint,
    write_training_log,
)
from xmodal.models.training import embed_dataset, train
from xmodal.schemas.run import Source

logger = logging.getLogger(__name__)


def register(subparsers, common: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "pipeline", parents=[common], help="run every stage from a run configuration"
    )
    add_aug_argument(parser)
    add_metric_arguments(parser)
    parser.set_defaults(handler=run)


@contextmanager
def stage(name: str):
    logger.info(f"Stage '{name}' started")
    try:
        yield
    except Exception as e:
        logger.error(f"Stage '{name}' failed: {e!r}")
        raise StageError(name, e) from e
    logger.info(f"Stage '{name}' finished")


def run(args: argparse.Namespace) -> int:
    run_config = load_config(args)
    require_keys(run_config, PIPELINE_REQUIRED)
    target = out_dir(args)
    workers = settings.WORKERS

    with stage("encode"):
        if run_config.run.source == Source.SYNTH:
            encoder = None
            if any(key.startswith("encoder.") for key in run_config.provided):
                encoder = run_config.encoder
            dataset = generate(run_config.synth, encoder)
            write_dataset(dataset, target / "dataset")
            items = materialize(dataset, workers)
        else:
            items = load_dataset(run_config, workers)

    with stage("train"):
        result = train(items, run_config.train, workers)
        save_checkpoint(result.params, target / CHECKPOINT_NAME)
        write_training_log(result.log, target / LOG_NAME)

    with stage("embed"):
        params = load_checkpoint(target / CHECKPOINT_NAME)
        embeddings = embed_dataset(params, items, run_config.train.augmentation, workers)
        save_embedding_set(embeddings, target / EMBEDDINGS_NAME)

    with stage("retrieve"):
        metric = run_config.metric
        k_max = run_config.run.k_max or metric.k_max
        depth = embeddings.total if metric.exclude_pairs else k_max
        ranked = {}
        for direction in DIRECTIONS[args.direction]:
            ranked[direction] = retrieve(direction, embeddings, depth)
            write_ranked_lists(
                truncate(ranked[direction], k_max),
                target / f"ranked_{direction.value}.tsv",
            )

    with stage("evaluate"):
        reports = [
            evaluate_ranked(direction, lists, embeddings.class_map, metric)
            for direction, lists in ranked.items()
        ]
        write_text_atomic(target / "report.tsv", render_report(reports, "tsv"))
        table = render_report(reports, "aligned_table", references=args.references)
        write_text_atomic(target / "report.txt", table)

    print(table, end="")
    return 0
