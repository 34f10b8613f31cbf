"""Embedding sets: TSV I/O, normalization and modality split.

The on-disk format is a header line ``XMODAL\\t1\\t<dim>`` followed by one
line per record, ``<id>\\t<class_id>\\t<image|text>\\t<v_1>\\t...\\t<v_dim>``,
UTF-8 with ``\\n`` line endings. Floats are written with 9 significant digits,
enough to reproduce a 32-bit float exactly.
"""

import logging
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from xmodal.core.exceptions import EmbeddingFormatError, ZeroNormError
from xmodal.core.files import write_text_atomic
from xmodal.schemas.embedding import EmbeddingRecord, EmbeddingSet, Modality

logger = logging.getLogger(__name__)

MAGIC = "XMODAL"
FORMAT_VERSION = 1


def format_float(value: float) -> str:
    return format(float(value), ".9g")


def _parse_int(text: str, what: str, line: int, path: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise EmbeddingFormatError(f"{what} '{text}' is not an integer", line, path)
    if value < 0:
        raise EmbeddingFormatError(f"{what} {value} is negative", line, path)
    return value


def parse_embedding_set(text: str, path: str = "") -> EmbeddingSet:
    """Parse the TSV embedding format.

    Args:
        text: Full file contents.
        path: Source name used in error messages.

    Returns:
        EmbeddingSet: Records in file order.

    Raises:
        EmbeddingFormatError: On a malformed header or row, a dimension
            mismatch, a duplicate id or a non-finite component; the error
            names the offending line.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise EmbeddingFormatError("missing header", 1, path)

    header = lines[0].split("\t")
    if len(header) != 3 or header[0] != MAGIC:
        raise EmbeddingFormatError(f"malformed header '{lines[0]}'", 1, path)
    if header[1] != str(FORMAT_VERSION):
        raise EmbeddingFormatError(f"unsupported format version '{header[1]}'", 1, path)
    dim = _parse_int(header[2], "dimension", 1, path)
    if dim < 1:
        raise EmbeddingFormatError("dimension must be at least 1", 1, path)

    records: list[EmbeddingRecord] = []
    seen: set[int] = set()
    for number, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) < 4:
            raise EmbeddingFormatError("too few fields", number, path)
        item_id = _parse_int(fields[0], "id", number, path)
        class_id = _parse_int(fields[1], "class id", number, path)
        try:
            modality = Modality(fields[2])
        except ValueError:
            raise EmbeddingFormatError(f"unknown modality '{fields[2]}'", number, path)
        components = fields[3:]
        if len(components) != dim:
            raise EmbeddingFormatError(
                f"dimension mismatch: {len(components)} components, header says {dim}",
                number,
                path,
            )
        try:
            values = [float(c) for c in components]
        except ValueError:
            raise EmbeddingFormatError("component is not a number", number, path)
        if not all(math.isfinite(v) for v in values):
            raise EmbeddingFormatError("non-finite component", number, path)
        if item_id in seen:
            raise EmbeddingFormatError(f"duplicate id {item_id}", number, path)
        seen.add(item_id)
        try:
            records.append(
                EmbeddingRecord(
                    id=item_id, class_id=class_id, modality=modality, vector=values
                )
            )
        except ValueError as e:
            # float32 overflow of an otherwise finite value
            raise EmbeddingFormatError(f"invalid vector: {e}", number, path)

    return EmbeddingSet(dim=dim, records=tuple(records))


def load_embedding_set(path: str | Path) -> EmbeddingSet:
    """Load and validate an embedding TSV file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise EmbeddingFormatError(f"cannot read file: {e}", path=str(path))
    embedding_set = parse_embedding_set(text, str(path))
    logger.info(
        f"Loaded {embedding_set.total} records (dim {embedding_set.dim}, "
        f"{embedding_set.class_count} classes) from {path}"
    )
    return embedding_set


def dump_embedding_set(embedding_set: EmbeddingSet) -> str:
    """Serialize an embedding set to the TSV format."""
    out = [f"{MAGIC}\t{FORMAT_VERSION}\t{embedding_set.dim}"]
    for r in embedding_set.records:
        values = "\t".join(format_float(v) for v in r.vector)
        out.append(f"{r.id}\t{r.class_id}\t{r.modality.value}\t{values}")
    return "\n".join(out) + "\n"


def save_embedding_set(embedding_set: EmbeddingSet, path: str | Path) -> None:
    """Write an embedding set atomically.

    Raises:
        OSError: If the destination is not writable.
    """
    write_text_atomic(path, dump_embedding_set(embedding_set))
    logger.info(f"Saved {embedding_set.total} records to {path}")


def embedding_set_from_arrays(
    ids: Sequence[int],
    class_ids: Sequence[int],
    modalities: Sequence[Modality],
    matrix: np.ndarray,
) -> EmbeddingSet:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if not (len(ids) == len(class_ids) == len(modalities) == matrix.shape[0]):
        raise ValueError("ids, class_ids, modalities and matrix rows differ in length")
    records = tuple(
        EmbeddingRecord(id=int(i), class_id=int(c), modality=m, vector=v)
        for i, c, m, v in zip(ids, class_ids, modalities, matrix)
    )
    return EmbeddingSet(dim=int(matrix.shape[1]), records=records)


def l2_normalize(vector: Iterable[float]) -> np.ndarray:
    """Scale a vector to unit Euclidean norm.

    Raises:
        ZeroNormError: If every component is zero.
    """
    v = np.asarray(vector, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ZeroNormError("cannot normalize a zero vector")
    return v / norm


def split_by_modality(embedding_set: EmbeddingSet) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Partition a set into its image side and its text side, order preserved."""
    images = tuple(r for r in embedding_set.records if r.modality == Modality.IMAGE)
    texts = tuple(r for r in embedding_set.records if r.modality == Modality.TEXT)
    return (
        EmbeddingSet(dim=embedding_set.dim, records=images),
        EmbeddingSet(dim=embedding_set.dim, records=texts),
    )


def subset(embedding_set: EmbeddingSet, ids: Iterable[int]) -> EmbeddingSet:
    keep = set(ids)
    return EmbeddingSet(
        dim=embedding_set.dim,
        records=tuple(r for r in embedding_set.records if r.id in keep),
    )
