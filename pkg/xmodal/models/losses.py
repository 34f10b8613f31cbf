"""Joint softmax + center loss.

For the features ``f_c`` of one class in a mini batch the center distance is
``d(f_c) = Σ_i ‖f_c^i − mean(f_c)‖²`` and the center loss of a batch holding
``m`` classes is ``½ Σ_c d(f_c)``. Images and encoded texts of a class share
one center, which pulls both modalities together. The softmax term is the
mean cross-entropy of the classifier logits.

Centers are treated as constants when differentiating, so the feature
gradient of the center term is ``lambda_center · (f_i − center)``. For the
in-batch mean this coincides with the exact gradient because the deviations
from a mean sum to zero.
"""

import logging
from typing import Iterable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from xmodal.core.exceptions import DatasetError, DivergenceError
from xmodal.models.network import (
    ModelParams,
    backbone_backward,
    backbone_forward,
    to_input,
)
from xmodal.schemas.embedding import Modality
from xmodal.schemas.training import LossBreakdown, TrainConfig

logger = logging.getLogger(__name__)


class MiniBatch(BaseModel):
    """Canvases of one optimization step with their classes and modalities.

    ``labels`` are classifier indices (``0 .. num_classes-1``) aligned with
    ``class_ids``.
    """

    inputs: np.ndarray
    class_ids: np.ndarray
    labels: np.ndarray
    modalities: tuple[Modality, ...]
    index: int = Field(default=0, ge=0)

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("class_ids", "labels", mode="before")
    @classmethod
    def _as_int(cls, value) -> np.ndarray:
        return np.asarray(value, dtype=np.int64)

    @model_validator(mode="after")
    def _check_lengths(self) -> "MiniBatch":
        n = len(self.inputs)
        if not (len(self.class_ids) == len(self.labels) == len(self.modalities) == n):
            raise ValueError("batch inputs, class ids, labels and modalities differ in length")
        return self

    @property
    def size(self) -> int:
        return len(self.inputs)

    def counts(self) -> dict[int, tuple[int, int]]:
        """Class id → ``(n_t, n_i)``: text and image counts in this batch."""
        out: dict[int, tuple[int, int]] = {}
        for class_id, modality in zip(self.class_ids.tolist(), self.modalities):
            n_t, n_i = out.get(class_id, (0, 0))
            if modality == Modality.TEXT:
                n_t += 1
            else:
                n_i += 1
            out[class_id] = (n_t, n_i)
        return out


class ClassCenters:
    """Per-class feature centers, one row per class id."""

    def __init__(self, class_ids: Sequence[int], centers: np.ndarray):
        centers = np.asarray(centers, dtype=np.float64)
        if centers.ndim != 2 or centers.shape[0] != len(class_ids):
            raise ValueError("one center row per class id is required")
        if not np.all(np.isfinite(centers)):
            raise ValueError("centers must be finite")
        self.class_ids = tuple(int(c) for c in class_ids)
        self.centers = centers
        self._row = {c: i for i, c in enumerate(self.class_ids)}

    @classmethod
    def from_features(cls, features: np.ndarray, class_ids: Sequence[int]) -> "ClassCenters":
        """Geometric mean of each class's features (classes in first-seen order)."""
        class_ids = np.asarray(class_ids)
        order = list(dict.fromkeys(class_ids.tolist()))
        centers = np.stack([features[class_ids == c].mean(axis=0) for c in order])
        return cls(order, centers)

    def rows_for(self, class_ids: Iterable[int]) -> np.ndarray:
        return self.centers[[self._row[int(c)] for c in class_ids]]

    def update(self, features: np.ndarray, class_ids: Sequence[int], alpha: float) -> None:
        """Move present centers towards their batch means: ``c ← c − α(c − μ)``."""
        batch = ClassCenters.from_features(features, class_ids)
        for class_id, mean in zip(batch.class_ids, batch.centers):
            row = self._row[class_id]
            self.centers[row] -= alpha * (self.centers[row] - mean)


def center_distance(features: Sequence[Sequence[float]] | np.ndarray) -> float:
    """Sum of squared distances of one class's features from their mean.

    Raises:
        DatasetError: If ``features`` is empty.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.size == 0 or f.shape[0] == 0:
        raise DatasetError("center distance of an empty class group")
    if f.ndim == 1:
        f = f[None, :]
    return float(((f - f.mean(axis=0)) ** 2).sum())


def center_loss(groups: Iterable[Sequence[Sequence[float]] | np.ndarray]) -> float:
    """``½ Σ_c d(f_c)`` over the class groups of a batch."""
    return 0.5 * sum(center_distance(g) for g in groups)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(logits: Sequence[float] | np.ndarray, label: int) -> float:
    """``−log softmax(logits)[label]``, stable against large logits.

    Raises:
        IndexError: If ``label`` is not a valid logit index.
    """
    z = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < z.shape[0]:
        raise IndexError(f"label {label} out of range for {z.shape[0]} logits")
    return float(max(-_log_softmax(z)[label], 0.0))


def joint_step(
    params: ModelParams,
    batch: MiniBatch,
    cfg: TrainConfig,
    centers: Optional[ClassCenters] = None,
) -> tuple[LossBreakdown, dict[str, np.ndarray], np.ndarray]:
    """Joint loss of one batch, the gradient of every parameter and the features.

    Args:
        params: Network weights.
        batch: Mini batch to evaluate.
        cfg: Training configuration (``lambda_center``).
        centers: Running class centers; ``None`` uses the in-batch class means.

    Returns:
        tuple: ``(LossBreakdown, gradients by parameter name, batch features)``.

    Raises:
        DivergenceError: If the loss is not finite.
    """
    features, caches = backbone_forward(params, to_input(batch.inputs))
    if not np.all(np.isfinite(features)):
        raise DivergenceError("non-finite features", batch=batch.index)
    logits = features @ params["cls.W"] + params["cls.b"]
    log_probs = _log_softmax(logits)
    n = batch.size
    softmax_loss = float(-log_probs[np.arange(n), batch.labels].mean())

    if centers is None:
        centers = ClassCenters.from_features(features, batch.class_ids)
    deviation = features - centers.rows_for(batch.class_ids)
    center = 0.5 * float((deviation**2).sum())

    if not (np.isfinite(softmax_loss) and np.isfinite(center)):
        raise DivergenceError("non-finite loss", batch=batch.index)
    losses = LossBreakdown.combine(softmax_loss, center, cfg.lambda_center)

    d_logits = np.exp(log_probs)
    d_logits[np.arange(n), batch.labels] -= 1.0
    d_logits /= n
    grads = {}
    d_features = d_logits @ params["cls.W"].T + cfg.lambda_center * deviation
    grads.update(backbone_backward(params, caches, d_features))
    grads["cls.W"] = features.T @ d_logits
    grads["cls.b"] = d_logits.sum(axis=0)
    return losses, {name: grads[name] for name in params.names}, features


def joint_loss_and_grads(
    params: ModelParams,
    batch: MiniBatch,
    cfg: TrainConfig,
    centers: Optional[ClassCenters] = None,
) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
    """Joint loss of one batch and the gradient of every parameter.

    See :func:`joint_step`, which also returns the batch features.
    """
    losses, grads, _ = joint_step(params, batch, cfg, centers)
    return losses, grads
