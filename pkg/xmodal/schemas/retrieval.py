import enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from xmodal.schemas.embedding import Modality


class Direction(str, enum.Enum):
    IMAGE_TO_TEXT = "i2t"
    TEXT_TO_IMAGE = "t2i"

    @property
    def query_modality(self) -> Modality:
        return Modality.IMAGE if self == Direction.IMAGE_TO_TEXT else Modality.TEXT

    @property
    def gallery_modality(self) -> Modality:
        return Modality.TEXT if self == Direction.IMAGE_TO_TEXT else Modality.IMAGE


class RankedList(BaseModel):
    """Gallery items for one query, most similar first."""

    query_id: int = Field(..., ge=0)
    gallery_ids: np.ndarray
    similarities: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("gallery_ids", mode="before")
    @classmethod
    def _as_ids(cls, value) -> np.ndarray:
        return np.asarray(value, dtype=np.int64).reshape(-1)

    @field_validator("similarities", mode="before")
    @classmethod
    def _as_float(cls, value) -> np.ndarray:
        return np.asarray(value, dtype=np.float64).reshape(-1)

    @model_validator(mode="after")
    def _check_order(self) -> "RankedList":
        if len(self.gallery_ids) != len(self.similarities):
            raise ValueError("gallery ids and similarities differ in length")
        if np.any(np.diff(self.similarities) > 0):
            raise ValueError(f"similarities of query {self.query_id} are not non-increasing")
        if len(np.unique(self.gallery_ids)) != len(self.gallery_ids):
            raise ValueError(f"ranked list of query {self.query_id} repeats a gallery id")
        if np.any(self.gallery_ids == self.query_id):
            raise ValueError(f"ranked list of query {self.query_id} contains the query")
        return self

    @property
    def entries(self) -> list[tuple[int, float]]:
        return [(int(g), float(s)) for g, s in zip(self.gallery_ids, self.similarities)]

    def __len__(self) -> int:
        return len(self.gallery_ids)
