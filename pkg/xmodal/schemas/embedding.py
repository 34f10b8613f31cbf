import enum
from functools import cached_property

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Modality(str, enum.Enum):
    IMAGE = "image"
    TEXT = "text"


class EmbeddingRecord(BaseModel):
    """One item of an embedding set: identity plus latent feature vector.

    Vectors are stored as read-only ``float32`` arrays; that is the precision
    features are produced and serialized at.
    """

    id: int = Field(..., ge=0)
    class_id: int = Field(..., ge=0)
    modality: Modality
    vector: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("vector", mode="before")
    @classmethod
    def _as_float32(cls, value) -> np.ndarray:
        vector = np.array(value, dtype=np.float32)
        if vector.ndim != 1 or vector.size == 0:
            raise ValueError("vector must be a non-empty 1-D array")
        if not np.all(np.isfinite(vector)):
            raise ValueError("vector has a non-finite component")
        vector.setflags(write=False)
        return vector

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.class_id == other.class_id
            and self.modality == other.modality
            and np.array_equal(self.vector, other.vector)
        )

    __hash__ = None


class EmbeddingSet(BaseModel):
    """Ordered, validated collection of embedding records of one dimension."""

    dim: int = Field(..., ge=1)
    records: tuple[EmbeddingRecord, ...] = ()

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _check_records(self) -> "EmbeddingSet":
        seen: set[int] = set()
        for position, record in enumerate(self.records):
            if record.dim != self.dim:
                raise ValueError(
                    f"record #{position} (id {record.id}) has dimension "
                    f"{record.dim}, expected {self.dim}"
                )
            if record.id in seen:
                raise ValueError(f"duplicate id {record.id}")
            seen.add(record.id)
        return self

    @property
    def total(self) -> int:
        return len(self.records)

    @cached_property
    def class_ids(self) -> tuple[int, ...]:
        """Distinct class ids in order of first appearance."""
        return tuple(dict.fromkeys(r.class_id for r in self.records))

    @property
    def class_count(self) -> int:
        return len(self.class_ids)

    @cached_property
    def ids(self) -> np.ndarray:
        return np.array([r.id for r in self.records], dtype=np.int64)

    @cached_property
    def matrix(self) -> np.ndarray:
        """``total × dim`` float64 matrix of the record vectors."""
        if not self.records:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.stack([r.vector for r in self.records]).astype(np.float64)

    @cached_property
    def class_map(self) -> dict[int, int]:
        """Item id → class id."""
        return {r.id: r.class_id for r in self.records}

    def count(self, modality: Modality) -> int:
        return sum(1 for r in self.records if r.modality == modality)

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return self.dim == other.dim and self.records == other.records

    __hash__ = None
