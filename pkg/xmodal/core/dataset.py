"""Dataset manifests and their conversion into network input canvases.

A manifest is a TSV file with the header ``id\\tclass\\tmodality\\tpath-or-tokens``.
Image rows reference a PPM file relative to the manifest's directory; text
rows carry the caption itself.
"""

import logging
from pathlib import Path
from typing import Optional, Sequence

from dotenv import dotenv_values

from xmodal.core.encoder import encode_descriptions, read_ppm, tokenize
from xmodal.core.exceptions import CanvasSizeError, DatasetError
from xmodal.core.files import write_text_atomic
from xmodal.schemas.dataset import LabeledCanvas, ManifestEntry
from xmodal.schemas.embedding import Modality
from xmodal.schemas.encoder import EncoderConfig, Vocabulary

logger = logging.getLogger(__name__)

MANIFEST_HEADER = "id\tclass\tmodality\tpath-or-tokens"
ENCODER_FILE = "encoder.env"


def parse_manifest(text: str, path: str = "") -> list[ManifestEntry]:
    """Parse manifest rows; the header line is optional.

    Raises:
        DatasetError: A malformed row or a duplicate id, naming the line.
    """
    entries: list[ManifestEntry] = []
    seen: set[int] = set()
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or (number == 1 and line == MANIFEST_HEADER):
            continue
        fields = line.split("\t", 3)
        if len(fields) != 4:
            raise DatasetError(f"{path}:{number}: expected 4 tab-separated fields")
        try:
            entry = ManifestEntry(
                id=int(fields[0]),
                class_id=int(fields[1]),
                modality=Modality(fields[2]),
                value=fields[3],
            )
        except ValueError as e:
            raise DatasetError(f"{path}:{number}: malformed manifest row ({e})")
        if entry.id in seen:
            raise DatasetError(f"{path}:{number}: duplicate id {entry.id}")
        seen.add(entry.id)
        entries.append(entry)
    return entries


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"cannot read manifest {path}: {e}")
    entries = parse_manifest(text, str(path))
    logger.info(f"Read {len(entries)} manifest entries from {path}")
    return entries


def write_manifest(entries: Sequence[ManifestEntry], path: str | Path) -> None:
    lines = [MANIFEST_HEADER]
    for e in entries:
        lines.append(f"{e.id}\t{e.class_id}\t{e.modality.value}\t{e.value}")
    write_text_atomic(path, "\n".join(lines) + "\n")


def load_canvases(
    entries: Sequence[ManifestEntry],
    vocab: Optional[Vocabulary],
    encoder: EncoderConfig,
    base_dir: str | Path,
    workers: int = 1,
) -> list[LabeledCanvas]:
    """Read image rows from PPM files and encode text rows; manifest order.

    Raises:
        DatasetError: An image cannot be read, or text rows without a vocabulary.
    """
    base_dir = Path(base_dir)
    texts = [e for e in entries if e.modality == Modality.TEXT]
    if texts and vocab is None:
        raise DatasetError("manifest has text rows but no vocabulary was given")
    encoded = iter(
        encode_descriptions([tokenize(e.value) for e in texts], vocab, encoder, workers)
        if texts
        else []
    )
    canvases = []
    for entry in entries:
        if entry.modality == Modality.TEXT:
            pixels = next(encoded).pixels
        else:
            try:
                pixels = read_ppm(base_dir / entry.value)
            except (OSError, CanvasSizeError, ValueError) as e:
                raise DatasetError(f"image {entry.id}: cannot read {entry.value}: {e}")
        canvases.append(
            LabeledCanvas(
                id=entry.id, class_id=entry.class_id, modality=entry.modality, pixels=pixels
            )
        )
    return canvases


def write_encoder_config(encoder: EncoderConfig, directory: str | Path) -> Path:
    """Record the encoder settings a dataset's texts must be encoded with."""
    path = Path(directory) / ENCODER_FILE
    lines = [f"encoder.{key}={value}" for key, value in encoder.model_dump().items()]
    write_text_atomic(path, "\n".join(lines) + "\n")
    return path


def read_encoder_config(directory: str | Path) -> Optional[EncoderConfig]:
    """Encoder settings stored next to a manifest, if any.

    Raises:
        DatasetError: The stored settings are invalid.
    """
    path = Path(directory) / ENCODER_FILE
    if not path.is_file():
        return None
    values = {
        key.removeprefix("encoder."): value
        for key, value in dotenv_values(path).items()
        if key.startswith("encoder.")
    }
    try:
        return EncoderConfig.model_validate(values)
    except ValueError as e:
        raise DatasetError(f"{path}: invalid encoder settings ({e})")
