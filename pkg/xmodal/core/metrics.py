"""Retrieval metrics: R@K, semantic λ@K and pair-excluded λ@K.

λ@K is the mean of the top-K similarities of every query, averaged over all
``N`` queries: ``λ@K = 1/(N·K) · Σ_queries Σ_{m ≤ K} similarity_m``. It
credits semantically close retrievals whether or not they belong to the
query's own pair group. The pair-excluded variant drops every retrieved item
of the query's class before taking the top K, so it measures only how close
the *other* classes' retrievals are.
"""

import logging
from typing import Mapping, Sequence

import numpy as np

from xmodal.core.exceptions import (
    InsufficientEntriesError,
    MetricError,
    UnknownClassError,
)
from xmodal.core.retrieval import retrieve
from xmodal.schemas.embedding import EmbeddingSet
from xmodal.schemas.metrics import MetricConfig, MetricReport, ReportScale
from xmodal.schemas.retrieval import Direction, RankedList

logger = logging.getLogger(__name__)


def _check_k(k: int) -> None:
    if k < 1:
        raise MetricError(f"K must be at least 1, got {k}")


def _class_of(classes: Mapping[int, int], item_id: int) -> int:
    try:
        return classes[item_id]
    except KeyError:
        raise UnknownClassError(f"no class known for item {item_id}")


def recall_at_k(ranked: Sequence[RankedList], classes: Mapping[int, int], k: int) -> float:
    """Percentage of queries with a same-class item among their first ``k``.

    A list shorter than ``k`` is judged on the entries it has.

    Raises:
        MetricError: No ranked lists, or ``k`` below 1.
    """
    _check_k(k)
    if not ranked:
        raise MetricError("recall of an empty ranked set")
    hits = 0
    for ranked_list in ranked:
        query_class = _class_of(classes, ranked_list.query_id)
        if any(_class_of(classes, int(g)) == query_class for g in ranked_list.gallery_ids[:k]):
            hits += 1
    return 100.0 * hits / len(ranked)


def _mean_top_k(rows: Sequence[np.ndarray], k: int) -> float:
    total = sum(float(row[:k].sum()) for row in rows)
    return total / (len(rows) * k)


def semantic_map_at_k(ranked: Sequence[RankedList], k: int) -> float:
    """λ@K over all queries (unit scale).

    Raises:
        MetricError: No ranked lists, or ``k`` below 1.
        InsufficientEntriesError: A list holds fewer than ``k`` entries.
    """
    _check_k(k)
    if not ranked:
        raise MetricError("λ@K of an empty ranked set")
    for ranked_list in ranked:
        if len(ranked_list) < k:
            raise InsufficientEntriesError(
                f"query {ranked_list.query_id} has {len(ranked_list)} entries, λ@{k} needs {k}"
            )
    return _mean_top_k([r.similarities for r in ranked], k)


def semantic_map_excluding_pairs(
    ranked_full: Sequence[RankedList], classes: Mapping[int, int], k: int
) -> float:
    """λ@K after discarding every retrieved item of the query's own class.

    ``ranked_full`` should be ranked deep enough (ideally over the whole
    gallery) that ``k`` cross-class entries remain for every query.

    Raises:
        MetricError: No ranked lists, or ``k`` below 1.
        InsufficientEntriesError: Fewer than ``k`` cross-class entries remain.
    """
    _check_k(k)
    if not ranked_full:
        raise MetricError("λ@K of an empty ranked set")
    rows = []
    for ranked_list in ranked_full:
        query_class = _class_of(classes, ranked_list.query_id)
        keep = np.array(
            [_class_of(classes, int(g)) != query_class for g in ranked_list.gallery_ids],
            dtype=bool,
        )
        remaining = ranked_list.similarities[keep]
        if len(remaining) < k:
            raise InsufficientEntriesError(
                f"query {ranked_list.query_id} keeps {len(remaining)} cross-class "
                f"entries, pair-excluded λ@{k} needs {k}"
            )
        rows.append(remaining)
    return _mean_top_k(rows, k)


def evaluate_ranked(
    direction: Direction | str,
    ranked: Sequence[RankedList],
    classes: Mapping[int, int],
    cfg: MetricConfig,
) -> MetricReport:
    """All metric families for one direction from precomputed ranked lists."""
    direction = Direction(direction)
    report = MetricReport(
        direction=direction,
        n_queries=len(ranked),
        recall={k: recall_at_k(ranked, classes, k) for k in cfg.ks},
        semantic_map={k: semantic_map_at_k(ranked, k) for k in cfg.ks},
        semantic_map_excluded=(
            {k: semantic_map_excluding_pairs(ranked, classes, k) for k in cfg.ks}
            if cfg.exclude_pairs
            else None
        ),
        scale=ReportScale.UNIT,
    )
    return report.rescaled(cfg.report_scale)


def evaluate(
    embedding_set: EmbeddingSet,
    cfg: MetricConfig,
    directions: Sequence[Direction] = (Direction.IMAGE_TO_TEXT, Direction.TEXT_TO_IMAGE),
) -> dict[Direction, MetricReport]:
    """Rank and score an embedding set in the requested directions.

    With ``exclude_pairs`` the whole gallery is ranked so that the
    pair-excluded λ@K can look past the query's own class.
    """
    k_max = embedding_set.total if cfg.exclude_pairs else cfg.k_max
    reports = {}
    for direction in map(Direction, directions):
        ranked = retrieve(direction, embedding_set, max(k_max, 1))
        report = evaluate_ranked(direction, ranked, embedding_set.class_map, cfg)
        logger.info(
            f"{direction.value}: {report.n_queries} queries, "
            f"R@{cfg.ks[0]}={report.recall[cfg.ks[0]]:.2f}"
        )
        reports[direction] = report
    return reports
