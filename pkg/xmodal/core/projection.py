"""Two-dimensional projection of an embedding set for external plotting."""

import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict
from sklearn.decomposition import PCA

from xmodal.core.embeddings import format_float
from xmodal.core.exceptions import DatasetError
from xmodal.core.files import write_text_atomic
from xmodal.schemas.embedding import EmbeddingSet, Modality

logger = logging.getLogger(__name__)

PROJECTION_HEADER = "id\tclass_id\tmodality\tx\ty"


class ProjectedPoint(BaseModel):
    id: int
    class_id: int
    modality: Modality
    x: float
    y: float

    model_config = ConfigDict(frozen=True)


def project_2d(embedding_set: EmbeddingSet) -> list[ProjectedPoint]:
    """Project L2-normalized features onto their first two principal axes.

    Each axis is oriented so that its largest-magnitude loading is positive,
    which makes the output independent of the solver's sign choice. A set
    with a single record, or features of dimension 1, gets zero for the
    missing coordinates.

    Raises:
        DatasetError: The set is empty.
    """
    if not embedding_set.total:
        raise DatasetError("cannot project an empty embedding set")
    matrix = embedding_set.matrix
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    matrix = matrix / np.where(norms == 0.0, 1.0, norms)

    n_components = min(2, embedding_set.total, embedding_set.dim)
    coords = np.zeros((embedding_set.total, 2))
    if embedding_set.total > 1:
        pca = PCA(n_components=n_components, svd_solver="full")
        reduced = pca.fit_transform(matrix)
        for axis, component in enumerate(pca.components_):
            if component[np.argmax(np.abs(component))] < 0:
                reduced[:, axis] = -reduced[:, axis]
        coords[:, :n_components] = reduced
        logger.info(
            f"Projected {embedding_set.total} records; explained variance "
            f"{pca.explained_variance_ratio_.sum():.3f}"
        )
    return [
        ProjectedPoint(
            id=r.id, class_id=r.class_id, modality=r.modality, x=float(x), y=float(y)
        )
        for r, (x, y) in zip(embedding_set.records, coords)
    ]


def dump_projection(points: list[ProjectedPoint]) -> str:
    lines = [PROJECTION_HEADER]
    for p in points:
        lines.append(
            f"{p.id}\t{p.class_id}\t{p.modality.value}\t"
            f"{format_float(p.x)}\t{format_float(p.y)}"
        )
    return "\n".join(lines) + "\n"


def write_projection(points: list[ProjectedPoint], path: str | Path) -> None:
    write_text_atomic(path, dump_projection(points))
    logger.info(f"Wrote 2-D projection of {len(points)} records to {path}")
