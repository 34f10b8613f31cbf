"""Training loop and dataset embedding for the single-stream network."""

import logging
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from xmodal.core.config import settings
from xmodal.core.embeddings import embedding_set_from_arrays
from xmodal.core.encoder import augment_canvas
from xmodal.core.exceptions import DatasetError, DimensionMismatchError, DivergenceError
from xmodal.models.losses import ClassCenters, MiniBatch, joint_step
from xmodal.models.network import (
    ModelParams,
    classify,
    forward_batch,
    init_params,
    recenter_features,
)
from xmodal.models.optim import Adam
from xmodal.schemas.dataset import LabeledCanvas
from xmodal.schemas.embedding import EmbeddingSet, Modality
from xmodal.schemas.encoder import AugmentMode
from xmodal.schemas.training import (
    Augmentation,
    CenterMode,
    EpochRecord,
    LossBreakdown,
    TrainConfig,
)

logger = logging.getLogger(__name__)


class TrainingResult(BaseModel):
    params: ModelParams
    log: list[EpochRecord]
    classes: tuple[int, ...]

    model_config = ConfigDict(arbitrary_types_allowed=True)


def _with_pixels(item: LabeledCanvas, pixels: np.ndarray) -> LabeledCanvas:
    return LabeledCanvas(
        id=item.id, class_id=item.class_id, modality=item.modality, pixels=pixels
    )


def prepare_inputs(
    items: Sequence[LabeledCanvas], augmentation: Augmentation
) -> list[LabeledCanvas]:
    """Input transform shared by training and embedding (half size under cfg-3)."""
    if augmentation != Augmentation.CFG_3:
        return list(items)
    return [
        _with_pixels(it, augment_canvas(it.pixels, AugmentMode.DOWNSAMPLE128))
        for it in items
    ]


def build_training_items(
    items: Sequence[LabeledCanvas], augmentation: Augmentation
) -> list[LabeledCanvas]:
    """Expand a dataset into training canvases for the chosen scheme.

    ``cfg-2`` and ``cfg-3`` add a horizontal flip of every image and a
    227-crop enlargement of every encoded text.
    """
    if augmentation == Augmentation.CFG_STD:
        return list(items)
    expanded: list[LabeledCanvas] = []
    for item in items:
        expanded.append(item)
        if item.modality == Modality.IMAGE:
            mode = AugmentMode.HFLIP
        else:
            mode = AugmentMode.CROP227_ENLARGE
        expanded.append(_with_pixels(item, augment_canvas(item.pixels, mode)))
    return prepare_inputs(expanded, augmentation)


def validate_training_data(items: Sequence[LabeledCanvas]) -> None:
    """At least two classes, each with an image and a text, all of one shape.

    Raises:
        DatasetError: On any violation.
    """
    modalities: dict[int, set[Modality]] = {}
    for item in items:
        modalities.setdefault(item.class_id, set()).add(item.modality)
    if len(modalities) < 2:
        raise DatasetError(f"training needs at least 2 classes, got {len(modalities)}")
    incomplete = sorted(c for c, m in modalities.items() if len(m) < 2)
    if incomplete:
        raise DatasetError(
            f"classes without both an image and a text: {incomplete[:10]}"
        )
    shapes = {item.shape for item in items}
    if len(shapes) > 1:
        raise DatasetError(f"canvases of different shapes: {sorted(shapes)}")


def _pack(groups: list[np.ndarray], batch_size: int) -> list[np.ndarray]:
    batches: list[np.ndarray] = []
    current: list[int] = []
    for members in groups:
        if current and len(current) + len(members) > batch_size:
            batches.append(np.array(current, dtype=np.int64))
            current = []
        current.extend(members.tolist())
    if current:
        batches.append(np.array(current, dtype=np.int64))
    return batches


def sample_batches(
    class_ids: np.ndarray, batch_size: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Index batches for one epoch.

    Classes are visited in random order and never split, so every sampled
    class brings all its images and texts into the same batch. A class larger
    than ``batch_size`` forms a batch of its own.
    """
    classes = np.unique(class_ids)
    order = classes[rng.permutation(len(classes))]
    return _pack([np.flatnonzero(class_ids == c) for c in order], batch_size)


def mean_intra_class_distance(features: np.ndarray, class_ids: Sequence[int]) -> float:
    """Mean Euclidean distance of each feature from its class mean."""
    class_ids = np.asarray(class_ids)
    if len(class_ids) == 0:
        return 0.0
    centers = ClassCenters.from_features(features, class_ids)
    return float(np.linalg.norm(features - centers.rows_for(class_ids), axis=1).mean())


def evaluate_losses(
    params: ModelParams,
    inputs: np.ndarray,
    class_ids: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
    workers: int = 1,
) -> tuple[LossBreakdown, np.ndarray]:
    """Loss breakdown averaged over deterministic class-ordered batches.

    Returns:
        tuple: ``(LossBreakdown, features of every input)``.
    """
    features = forward_batch(params, inputs, workers=workers)
    if not np.all(np.isfinite(features)):
        raise DivergenceError("non-finite features during evaluation")
    logits = classify(params, features)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    nll = -log_probs[np.arange(len(labels)), labels]

    batches = _pack([np.flatnonzero(class_ids == c) for c in np.unique(class_ids)], cfg.batch)
    softmax_terms, center_terms = [], []
    for idx in batches:
        batch_features, batch_classes = features[idx], class_ids[idx]
        centers = ClassCenters.from_features(batch_features, batch_classes)
        deviation = batch_features - centers.rows_for(batch_classes)
        softmax_terms.append(float(nll[idx].mean()))
        center_terms.append(0.5 * float((deviation**2).sum()))
    losses = LossBreakdown.combine(
        float(np.mean(softmax_terms)), float(np.mean(center_terms)), cfg.lambda_center
    )
    return losses, features


def train(
    items: Sequence[LabeledCanvas], cfg: TrainConfig, workers: int | None = None
) -> TrainingResult:
    """Train the single-stream network with joint softmax + center loss.

    Epoch 0 of the returned log describes the initialization; epoch ``e``
    describes the parameters after ``e`` passes over the data. The run is
    reproducible bit for bit from ``cfg.seed``.

    After every epoch the feature layer is recentred so that the training
    features average to zero, which keeps cosine similarity driven by class
    structure instead of a shared offset.

    Raises:
        DatasetError: Preconditions on the data are violated.
        DivergenceError: A loss became non-finite (reports epoch and batch).
    """
    workers = workers or settings.WORKERS
    validate_training_data(items)
    training_items = build_training_items(items, cfg.augmentation)
    inputs = np.stack([it.pixels for it in training_items])
    class_ids = np.array([it.class_id for it in training_items], dtype=np.int64)
    modalities = [it.modality for it in training_items]
    classes = np.unique(class_ids)
    labels = np.searchsorted(classes, class_ids)

    rng = np.random.default_rng(cfg.seed)
    params = init_params(
        cfg.backbone, tuple(inputs.shape[1:]), cfg.feature_dim, len(classes), rng
    )
    optimizer = Adam(params, cfg)
    logger.info(
        f"Training on {len(training_items)} canvases ({len(classes)} classes, "
        f"{cfg.augmentation.value}) for {cfg.epochs} epochs"
    )

    losses, features = evaluate_losses(params, inputs, class_ids, labels, cfg, workers)
    log = [_record(0, losses, features, class_ids)]
    centers = (
        ClassCenters.from_features(features, class_ids)
        if cfg.center_mode == CenterMode.EMA
        else None
    )

    for epoch in range(1, cfg.epochs + 1):
        for b, idx in enumerate(sample_batches(class_ids, cfg.batch, rng)):
            batch = MiniBatch(
                inputs=inputs[idx],
                class_ids=class_ids[idx],
                labels=labels[idx],
                modalities=tuple(modalities[i] for i in idx),
                index=b,
            )
            try:
                _, grads, batch_features = joint_step(params, batch, cfg, centers)
            except DivergenceError as e:
                logger.error(f"Training diverged at epoch {epoch}, batch {b}")
                raise DivergenceError(e.reason, epoch=epoch, batch=b) from e
            optimizer.step(params, grads, epoch - 1)
            if centers is not None:
                centers.update(batch_features, batch.class_ids, cfg.center_alpha)
        if not params.is_finite():
            raise DivergenceError("non-finite parameters", epoch=epoch, batch=b)
        try:
            losses, features = evaluate_losses(params, inputs, class_ids, labels, cfg, workers)
        except DivergenceError as e:
            raise DivergenceError(e.reason, epoch=epoch, batch=b) from e
        # features stay centred on the training set; losses are unaffected
        mean = features.mean(axis=0)
        recenter_features(params, mean)
        features = features - mean
        if centers is not None:
            centers.centers -= mean
        log.append(_record(epoch, losses, features, class_ids))

    if cfg.epochs and np.all(features.std(axis=0) < 1e-9):
        logger.warning(
            "All training features are identical: the network collapsed, "
            "try a lower train.lr"
        )
    return TrainingResult(params=params, log=log, classes=tuple(int(c) for c in classes))


def _record(
    epoch: int, losses: LossBreakdown, features: np.ndarray, class_ids: np.ndarray
) -> EpochRecord:
    record = EpochRecord(
        epoch=epoch,
        losses=losses,
        intra_class_distance=mean_intra_class_distance(features, class_ids),
    )
    logger.info(
        f"epoch {epoch}: softmax={losses.softmax_loss:.4f} center={losses.center_loss:.4f} "
        f"total={losses.total:.4f} intra={record.intra_class_distance:.4f}"
    )
    return record


def embed_dataset(
    params: ModelParams,
    items: Sequence[LabeledCanvas],
    augmentation: Augmentation = Augmentation.CFG_STD,
    workers: int | None = None,
) -> EmbeddingSet:
    """Embed every item; records keep the input order and metadata.

    Raises:
        DimensionMismatchError: A canvas does not match the network input.
    """
    if not items:
        return EmbeddingSet(dim=params.feature_dim)
    prepared = prepare_inputs(items, augmentation)
    for item in prepared:
        if item.shape != params.input_shape:
            raise DimensionMismatchError(
                f"item {item.id}: canvas {item.shape} does not match network input "
                f"{params.input_shape}"
            )
    features = forward_batch(
        params, [it.pixels for it in prepared], workers=workers or settings.WORKERS
    )
    return embedding_set_from_arrays(
        [it.id for it in items],
        [it.class_id for it in items],
        [it.modality for it in items],
        features,
    )
