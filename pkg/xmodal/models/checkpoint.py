"""Checkpoint and training-log persistence.

Checkpoint layout (little endian)::

    b"XMPARAM"  uint32 version
    uint32 len  backbone spec string (UTF-8)
    uint32 n    tensors, each:
        uint32 len  name (UTF-8)
        uint32 ndim, uint32 × ndim shape
        float32 × prod(shape) row-major data
"""

import logging
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from xmodal.core.embeddings import format_float
from xmodal.core.exceptions import CheckpointError
from xmodal.core.files import write_bytes_atomic, write_text_atomic
from xmodal.models.network import ModelParams
from xmodal.schemas.training import EpochRecord, LossBreakdown

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"XMPARAM"
CHECKPOINT_VERSION = 1
LOG_HEADER = "epoch\tsoftmax\tcenter\ttotal"


def _pack_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def checkpoint_bytes(params: ModelParams) -> bytes:
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        _pack_str(params.spec_string()),
        struct.pack("<I", len(params.tensors)),
    ]
    for name, tensor in params.tensors.items():
        parts.append(_pack_str(name))
        parts.append(struct.pack("<I", tensor.ndim))
        parts.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        parts.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    return b"".join(parts)


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    """Write parameters atomically; values are stored as float32."""
    write_bytes_atomic(path, checkpoint_bytes(params))
    logger.info(f"Saved checkpoint ({len(params.tensors)} tensors) to {path}")


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        chunk = self.data[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def uint(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self) -> str:
        try:
            return self.take(self.uint()).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError(f"{self.path}: invalid UTF-8 string")


def load_checkpoint(path: str | Path) -> ModelParams:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises:
        CheckpointError: Unreadable, truncated or inconsistent file.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}")
    reader = _Reader(data, str(path))
    if reader.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not an xmodal checkpoint")
    version = reader.uint()
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    spec = ModelParams.parse_spec_string(reader.text())
    tensors: dict[str, np.ndarray] = {}
    for _ in range(reader.uint()):
        name = reader.text()
        ndim = reader.uint()
        shape = struct.unpack(f"<{ndim}I", reader.take(4 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        tensors[name] = np.frombuffer(reader.take(4 * count), dtype="<f4").reshape(shape)
    if reader.pos != len(data):
        raise CheckpointError(f"{path}: trailing bytes after the last tensor")
    return ModelParams(tensors=tensors, **spec)


def dump_training_log(log: Sequence[EpochRecord]) -> str:
    lines = [LOG_HEADER]
    for record in log:
        losses = record.losses
        lines.append(
            f"{record.epoch}\t{format_float(losses.softmax_loss)}\t"
            f"{format_float(losses.center_loss)}\t{format_float(losses.total)}"
        )
    return "\n".join(lines) + "\n"


def write_training_log(log: Sequence[EpochRecord], path: str | Path) -> None:
    write_text_atomic(path, dump_training_log(log))


def read_training_log(path: str | Path) -> list[EpochRecord]:
    """Parse a training-log TSV (intra-class distances are not stored)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != LOG_HEADER:
        raise CheckpointError(f"{path}: missing training log header")
    records = []
    for number, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        try:
            epoch, softmax, center, total = (
                int(fields[0]),
                float(fields[1]),
                float(fields[2]),
                float(fields[3]),
            )
        except (IndexError, ValueError):
            raise CheckpointError(f"{path}:{number}: malformed training log row")
        records.append(
            EpochRecord(
                epoch=epoch,
                losses=LossBreakdown(
                    softmax_loss=softmax, center_loss=center, total=total
                ),
            )
        )
    return records
