"""Exact cosine retrieval between the two modalities of an embedding set."""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from xmodal.core.config import settings
from xmodal.core.embeddings import format_float, split_by_modality
from xmodal.core.exceptions import (
    DatasetError,
    DimensionMismatchError,
    EmbeddingFormatError,
    ModalityError,
    ZeroNormError,
)
from xmodal.core.files import write_text_atomic
from xmodal.schemas.embedding import EmbeddingSet
from xmodal.schemas.retrieval import Direction, RankedList

logger = logging.getLogger(__name__)

RANKED_HEADER = "query_id\trank\tgallery_id\tsimilarity"


def cosine(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> float:
    """Cosine similarity of two non-zero vectors, clipped to ``[-1, 1]``.

    Raises:
        DimensionMismatchError: The vectors differ in length.
        ZeroNormError: Either vector is zero.
    """
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"cannot compare vectors of shape {a.shape} and {b.shape}"
        )
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine of a zero vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _unit_rows(embedding_set: EmbeddingSet, side: str) -> np.ndarray:
    matrix = embedding_set.matrix
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if len(zero):
        item = int(embedding_set.ids[zero[0]])
        raise ZeroNormError(f"{side} item {item} (row {int(zero[0])}) has a zero vector")
    return matrix / norms[:, None]


def similarity_matrix(
    queries: EmbeddingSet, gallery: EmbeddingSet, workers: int | None = None
) -> np.ndarray:
    """Cosine similarity of every query against every gallery item.

    Query rows are processed in blocks of ``settings.SIMILARITY_BLOCK``;
    blocks may run on parallel threads, the result is the same either way.

    Raises:
        DimensionMismatchError: The sets have different dimensions.
        DatasetError: Either set is empty.
        ZeroNormError: A zero vector, naming the offending item.
    """
    if queries.dim != gallery.dim:
        raise DimensionMismatchError(
            f"query dimension {queries.dim} differs from gallery dimension {gallery.dim}"
        )
    if not queries.total or not gallery.total:
        raise DatasetError("similarity needs non-empty query and gallery sets")
    q = _unit_rows(queries, "query")
    g = _unit_rows(gallery, "gallery")
    block = settings.SIMILARITY_BLOCK
    starts = range(0, len(q), block)

    def run(start: int) -> np.ndarray:
        return np.clip(q[start : start + block] @ g.T, -1.0, 1.0)

    workers = workers or settings.WORKERS
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.concatenate(list(pool.map(run, starts)), axis=0)
    return np.concatenate([run(start) for start in starts], axis=0)


def rank(
    queries: EmbeddingSet,
    gallery: EmbeddingSet,
    k_max: int,
    workers: int | None = None,
) -> list[RankedList]:
    """Top ``k_max`` gallery items per query.

    Lists are ordered by similarity descending with ties broken by ascending
    gallery id; a gallery item carrying the query's own id is never listed.

    Raises:
        ValueError: ``k_max`` below 1.
        DatasetError: Empty gallery.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be at least 1, got {k_max}")
    if not gallery.total:
        raise DatasetError("cannot rank against an empty gallery")
    sims = similarity_matrix(queries, gallery, workers)
    gallery_ids = gallery.ids
    order = np.lexsort((np.broadcast_to(gallery_ids, sims.shape), -sims), axis=-1)
    lists = []
    for row, query_id in enumerate(queries.ids):
        ranked = order[row]
        ranked = ranked[gallery_ids[ranked] != query_id][:k_max]
        lists.append(
            RankedList(
                query_id=int(query_id),
                gallery_ids=gallery_ids[ranked],
                similarities=sims[row, ranked],
            )
        )
    return lists


def retrieve(
    direction: Direction | str, embedding_set: EmbeddingSet, k_max: int
) -> list[RankedList]:
    """Rank queries of one modality against the gallery of the other.

    Raises:
        ModalityError: The set lacks one of the two modalities.
    """
    direction = Direction(direction)
    images, texts = split_by_modality(embedding_set)
    if not images.total or not texts.total:
        missing = "image" if not images.total else "text"
        raise ModalityError(f"embedding set has no {missing} items")
    queries, gallery = (
        (images, texts) if direction == Direction.IMAGE_TO_TEXT else (texts, images)
    )
    lists = rank(queries, gallery, k_max)
    logger.info(
        f"{direction.value}: ranked {queries.total} queries against "
        f"{gallery.total} gallery items (K_max {k_max})"
    )
    return lists


def restrict_queries(
    lists: Sequence[RankedList], query_ids: Iterable[int]
) -> list[RankedList]:
    keep = set(query_ids)
    return [ranked for ranked in lists if ranked.query_id in keep]


def dump_ranked_lists(lists: Sequence[RankedList]) -> str:
    lines = [RANKED_HEADER]
    for ranked in lists:
        for position, (gallery_id, similarity) in enumerate(ranked.entries, start=1):
            lines.append(
                f"{ranked.query_id}\t{position}\t{gallery_id}\t{format_float(similarity)}"
            )
    return "\n".join(lines) + "\n"


def write_ranked_lists(lists: Sequence[RankedList], path: str | Path) -> None:
    write_text_atomic(path, dump_ranked_lists(lists))
    logger.info(f"Wrote {len(lists)} ranked lists to {path}")


def read_ranked_lists(path: str | Path) -> list[RankedList]:
    """Parse a ranked-list TSV; queries keep their first-seen order.

    Raises:
        EmbeddingFormatError: Malformed header or row, or ranks out of sequence.
    """
    path = str(path)
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != RANKED_HEADER:
        raise EmbeddingFormatError("missing ranked-list header", 1, path)
    rows: dict[int, list[tuple[int, float]]] = {}
    for number, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != 4:
            raise EmbeddingFormatError("expected 4 fields", number, path)
        try:
            query_id, position, gallery_id = (int(f) for f in fields[:3])
            similarity = float(fields[3])
        except ValueError:
            raise EmbeddingFormatError("malformed number", number, path)
        entries = rows.setdefault(query_id, [])
        if position != len(entries) + 1:
            raise EmbeddingFormatError(
                f"rank {position} out of sequence for query {query_id}", number, path
            )
        entries.append((gallery_id, similarity))
    try:
        return [
            RankedList(
                query_id=query_id,
                gallery_ids=[g for g, _ in entries],
                similarities=[s for _, s in entries],
            )
            for query_id, entries in rows.items()
        ]
    except ValueError as e:
        raise EmbeddingFormatError(f"invalid ranked list: {e}", path=path)


def truncate(lists: Sequence[RankedList], k_max: int) -> list[RankedList]:
    """Ranked lists cut to their first ``k_max`` entries."""
    return [
        RankedList(
            query_id=r.query_id,
            gallery_ids=r.gallery_ids[:k_max],
            similarities=r.similarities[:k_max],
        )
        for r in lists
    ]
