"""Unit tests for the training loop and dataset embedding."""

import numpy as np
import pytest

from tests.conftest import TINY_BACKBONE
from xmodal.core.exceptions import DatasetError, DimensionMismatchError
from xmodal.models.network import forward_batch, init_params
from xmodal.models.training import (
    build_training_items,
    embed_dataset,
    mean_intra_class_distance,
    prepare_inputs,
    sample_batches,
    train,
    validate_training_data,
)
from xmodal.schemas.dataset import LabeledCanvas
from xmodal.schemas.embedding import Modality
from xmodal.schemas.training import Augmentation, CenterMode


def _separable_items(per_class: int = 3, size: int = 32) -> list[LabeledCanvas]:
    """Two classes: reddish canvases and bluish canvases, both modalities."""
    rng = np.random.default_rng(0)
    items, next_id = [], 0
    for class_id, channel in ((0, 0), (1, 2)):
        for modality in (Modality.IMAGE, Modality.TEXT):
            for _ in range(per_class):
                pixels = rng.integers(0, 60, (size, size, 3))
                pixels[..., channel] += 180
                items.append(
                    LabeledCanvas(
                        id=next_id,
                        class_id=class_id,
                        modality=modality,
                        pixels=pixels.astype(np.uint8),
                    )
                )
                next_id += 1
    return items


def test_validate_needs_two_classes():
    items = [it for it in _separable_items() if it.class_id == 0]
    with pytest.raises(DatasetError):
        validate_training_data(items)


def test_validate_needs_both_modalities_per_class():
    items = [
        it
        for it in _separable_items()
        if not (it.class_id == 1 and it.modality == Modality.TEXT)
    ]
    with pytest.raises(DatasetError) as exc_info:
        validate_training_data(items)
    assert "[1]" in str(exc_info.value)


def test_validate_needs_one_canvas_shape():
    items = _separable_items()
    items.append(
        LabeledCanvas(
            id=99,
            class_id=0,
            modality=Modality.IMAGE,
            pixels=np.zeros((16, 16, 3), dtype=np.uint8),
        )
    )
    with pytest.raises(DatasetError):
        validate_training_data(items)


def test_sample_batches_never_split_classes():
    class_ids = np.repeat(np.arange(6), 4)
    batches = sample_batches(class_ids, 10, np.random.default_rng(0))
    assert sorted(np.concatenate(batches).tolist()) == list(range(24))
    for batch in batches:
        for class_id in np.unique(class_ids[batch]):
            assert np.sum(class_ids[batch] == class_id) == 4


def test_oversized_class_forms_its_own_batch():
    class_ids = np.array([0] * 5 + [1])
    batches = sample_batches(class_ids, 3, np.random.default_rng(1))
    assert sorted(len(b) for b in batches) == [1, 5]


def test_build_training_items_cfg2_doubles_the_set():
    items = _separable_items(per_class=1, size=256)
    expanded = build_training_items(items, Augmentation.CFG_2)
    assert len(expanded) == 2 * len(items)
    flipped = expanded[1]
    np.testing.assert_array_equal(flipped.pixels, items[0].pixels[:, ::-1])


def test_cfg3_halves_every_input():
    items = _separable_items(per_class=1, size=256)
    expanded = build_training_items(items, Augmentation.CFG_3)
    assert {it.shape for it in expanded} == {(128, 128, 3)}
    assert {it.shape for it in prepare_inputs(items, Augmentation.CFG_3)} == {
        (128, 128, 3)
    }


def test_mean_intra_class_distance():
    features = np.array([[1.0, 0.0], [-1.0, 0.0], [5.0, 5.0]])
    assert mean_intra_class_distance(features, [0, 0, 1]) == pytest.approx(2 / 3)


def test_zero_epochs_keep_initialization(tiny_train):
    cfg = tiny_train.model_copy(update={"epochs": 0})
    result = train(_separable_items(), cfg)
    init = init_params(TINY_BACKBONE, (32, 32, 3), 8, 2, np.random.default_rng(cfg.seed))
    assert result.params == init
    assert [r.epoch for r in result.log] == [0]
    assert result.classes == (0, 1)


def test_training_reduces_loss(tiny_train):
    cfg = tiny_train.model_copy(update={"epochs": 30})
    result = train(_separable_items(), cfg)
    assert len(result.log) == 31
    assert result.log[-1].losses.total < result.log[0].losses.total


def test_trained_features_are_centred(tiny_train):
    items = _separable_items()
    result = train(items, tiny_train)
    features = forward_batch(result.params, [it.pixels for it in items])
    np.testing.assert_allclose(features.mean(axis=0), 0.0, atol=1e-9)


def test_training_is_reproducible(tiny_train):
    first = train(_separable_items(), tiny_train)
    second = train(_separable_items(), tiny_train)
    assert first.params == second.params
    assert [r.losses for r in first.log] == [r.losses for r in second.log]


def test_ema_centers_train(tiny_train):
    cfg = tiny_train.model_copy(update={"center_mode": CenterMode.EMA})
    result = train(_separable_items(), cfg)
    assert result.params.is_finite()


def test_embed_empty_dataset():
    params = init_params(TINY_BACKBONE, (32, 32, 3), 8, 2, np.random.default_rng(0))
    embedded = embed_dataset(params, [])
    assert embedded.total == 0
    assert embedded.dim == 8


def test_embed_one_class():
    params = init_params(TINY_BACKBONE, (32, 32, 3), 8, 2, np.random.default_rng(0))
    items = [
        it
        for it in _separable_items(per_class=5)
        if it.class_id == 0 and (it.modality == Modality.TEXT or it.id == 0)
    ]
    embedded = embed_dataset(params, items)
    assert embedded.total == 6
    assert embedded.class_count == 1
    assert [r.id for r in embedded.records] == [it.id for it in items]


def test_embed_rejects_wrong_canvas():
    params = init_params(TINY_BACKBONE, (32, 32, 3), 8, 2, np.random.default_rng(0))
    with pytest.raises(DimensionMismatchError):
        embed_dataset(params, _separable_items(size=64))
