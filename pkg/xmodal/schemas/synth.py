from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from xmodal.schemas.dataset import LabeledCanvas
from xmodal.schemas.embedding import Modality
from xmodal.schemas.encoder import EncoderConfig, Vocabulary
from xmodal.schemas.metrics import MetricReport
from xmodal.schemas.retrieval import Direction
from xmodal.schemas.training import EpochRecord


class SynthConfig(BaseModel):
    """Synthetic cross-modal dataset parameters.

    Classes are grouped into disjoint pairs ``(0, 1), (2, 3), ...``; a
    fraction ``overlap_rho`` of those pairs share one concept vector, which
    makes the two classes semantically identical while remaining distinct
    pair groups.
    """

    classes: int = Field(default=20, ge=1)
    images_per_class: int = Field(default=1, ge=1)
    texts_per_class: int = Field(default=5, ge=1)
    concept_dim: int = Field(default=32, ge=1)
    noise_sigma: float = Field(default=0.3, ge=0)
    overlap_rho: float = Field(default=0.0, ge=0, le=1)
    vocab_size: int = Field(default=200, ge=1)
    words_per_text: int = Field(default=6, ge=1)
    word_dim: int = Field(default=15, ge=1)
    canvas_size: int = Field(default=64, ge=8)
    tiles: int = Field(default=8, ge=1)
    seed: int = 0

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_sizes(self) -> "SynthConfig":
        if self.concept_dim < self.classes:
            raise ValueError(
                f"concept_dim ({self.concept_dim}) must be at least the number of "
                f"classes ({self.classes}) to keep concepts orthogonal"
            )
        if self.canvas_size % self.tiles:
            raise ValueError("canvas_size must be a multiple of tiles")
        return self


class SemanticOracle(BaseModel):
    """Ground-truth semantic similarity between classes."""

    class_ids: tuple[int, ...]
    similarity: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("similarity", mode="before")
    @classmethod
    def _as_matrix(cls, value) -> np.ndarray:
        matrix = np.array(value, dtype=np.float64)
        matrix.setflags(write=False)
        return matrix

    @model_validator(mode="after")
    def _check_matrix(self) -> "SemanticOracle":
        n = len(self.class_ids)
        if self.similarity.shape != (n, n):
            raise ValueError(f"oracle matrix must be {n}×{n}")
        if not np.array_equal(self.similarity, self.similarity.T):
            raise ValueError("oracle matrix must be symmetric")
        if not np.all(np.diag(self.similarity) == 1.0):
            raise ValueError("oracle matrix must have a unit diagonal")
        return self

    def index(self, class_id: int) -> Optional[int]:
        try:
            return self.class_ids.index(class_id)
        except ValueError:
            return None


class TextSample(BaseModel):
    id: int = Field(..., ge=0)
    class_id: int = Field(..., ge=0)
    tokens: tuple[str, ...]

    model_config = ConfigDict(frozen=True)


class SynthDataset(BaseModel):
    """Images, tokenized texts, their vocabulary and the semantic oracle."""

    config: SynthConfig
    encoder: EncoderConfig
    images: tuple[LabeledCanvas, ...]
    texts: tuple[TextSample, ...]
    vocabulary: Vocabulary
    oracle: SemanticOracle

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @property
    def class_map(self) -> dict[int, int]:
        out = {item.id: item.class_id for item in self.images}
        out.update({text.id: text.class_id for text in self.texts})
        return out

    def count(self, modality: Modality) -> int:
        return len(self.images) if modality == Modality.IMAGE else len(self.texts)


class GroupMetrics(BaseModel):
    """Metrics of one direction restricted to a group of query classes."""

    direction: Direction
    group: str
    report: Optional[MetricReport] = None

    model_config = ConfigDict(frozen=True)


class OverlapReport(BaseModel):
    """Outcome of an overlap experiment.

    ``semantic_miss_rate[d][K]`` is the share of top-K retrievals from another
    class that the oracle rates as semantically identical to the query's
    class: retrievals R@K scores as wrong although they are right in meaning.
    ``lambda_gap[d][K]`` is the pair-excluded λ@K of overlapped-class queries
    minus that of the other queries, when both groups exist.
    """

    rho: float
    seed: int
    overlapped_classes: tuple[int, ...]
    groups: tuple[GroupMetrics, ...]
    semantic_miss_rate: dict[Direction, dict[int, float]]
    lambda_gap: dict[Direction, Optional[dict[int, float]]]
    final_epoch: Optional[EpochRecord] = None

    model_config = ConfigDict(frozen=True)
