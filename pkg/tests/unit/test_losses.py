"""Unit tests for the joint softmax + center loss and its gradients."""

import math

import numpy as np
import pytest

from xmodal.core.exceptions import DatasetError, DivergenceError
from xmodal.models.losses import (
    ClassCenters,
    MiniBatch,
    center_distance,
    center_loss,
    joint_loss_and_grads,
    softmax_cross_entropy,
)
from xmodal.models.network import init_params
from xmodal.schemas.embedding import Modality
from xmodal.schemas.training import TrainConfig

GRAD_BACKBONE = "conv:2:tanh,pool:2"
INPUT_SHAPE = (4, 4, 3)


def _batch(rng: np.random.Generator, class_ids: list[int]) -> MiniBatch:
    classes = sorted(set(class_ids))
    return MiniBatch(
        inputs=rng.uniform(0, 255, size=(len(class_ids), *INPUT_SHAPE)),
        class_ids=class_ids,
        labels=[classes.index(c) for c in class_ids],
        modalities=tuple(
            Modality.IMAGE if i % 2 else Modality.TEXT for i in range(len(class_ids))
        ),
    )


def _grad_cfg(lambda_center: float = 0.5) -> TrainConfig:
    return TrainConfig(
        backbone=GRAD_BACKBONE, feature_dim=3, lambda_center=lambda_center
    )


def test_center_distance_symmetric_pair():
    assert center_distance([[1.0, 0.0], [-1.0, 0.0]]) == 2.0


def test_center_distance_singleton_is_zero():
    assert center_distance([[0.3, -2.0, 5.0]]) == 0.0


def test_center_distance_empty_group():
    with pytest.raises(DatasetError):
        center_distance(np.zeros((0, 2)))


def test_center_distance_matches_double_loop():
    features = np.random.default_rng(0).normal(size=(10, 128))
    mean = [sum(features[i][j] for i in range(10)) / 10 for j in range(128)]
    expected = sum(
        (features[i][j] - mean[j]) ** 2 for i in range(10) for j in range(128)
    )
    assert center_distance(features) == pytest.approx(expected, rel=1e-12)


def test_center_loss_two_classes():
    group = [[1.0, 0.0], [-1.0, 0.0]]
    assert center_loss([group, group]) == 2.0


def test_center_loss_identical_features_is_zero():
    assert center_loss([[[1.0, 2.0]] * 3, [[0.0, -1.0]] * 4]) == 0.0


def test_center_loss_single_class_is_half_distance():
    group = np.random.default_rng(1).normal(size=(5, 3))
    assert center_loss([group]) == pytest.approx(0.5 * center_distance(group))


def test_softmax_uniform_logits():
    assert softmax_cross_entropy([0.3] * 7, 2) == pytest.approx(math.log(7))


def test_softmax_is_stable_for_large_logits():
    assert softmax_cross_entropy([1000.0, 0.0], 0) == pytest.approx(0.0, abs=1e-12)
    assert softmax_cross_entropy([0.0, 1000.0], 0) == pytest.approx(1000.0)


def test_softmax_matches_reference():
    rng = np.random.default_rng(2)
    for _ in range(20):
        logits = rng.normal(scale=3.0, size=6)
        label = int(rng.integers(6))
        reference = -logits[label] + math.log(math.fsum(math.exp(z) for z in logits))
        assert softmax_cross_entropy(logits, label) == pytest.approx(reference, rel=1e-12)


def test_softmax_label_out_of_range():
    with pytest.raises(IndexError):
        softmax_cross_entropy([0.0, 1.0], 2)


def test_minibatch_counts():
    batch = _batch(np.random.default_rng(0), [4, 4, 4, 9])
    # odd positions are images: class 9 sits at index 3
    assert batch.counts() == {4: (2, 1), 9: (0, 1)}


def test_minibatch_rejects_length_mismatch():
    with pytest.raises(ValueError):
        MiniBatch(
            inputs=np.zeros((2, *INPUT_SHAPE)),
            class_ids=[0],
            labels=[0, 0],
            modalities=(Modality.IMAGE, Modality.TEXT),
        )


def test_class_centers_update_moves_towards_mean():
    centers = ClassCenters([0, 1], np.zeros((2, 2)))
    centers.update(np.array([[2.0, 2.0], [4.0, 0.0]]), [0, 0], alpha=0.5)
    np.testing.assert_allclose(centers.centers, [[1.5, 0.5], [0.0, 0.0]])


def test_zero_lambda_total_is_softmax():
    rng = np.random.default_rng(3)
    params = init_params(GRAD_BACKBONE, INPUT_SHAPE, 3, 2, rng)
    losses, _ = joint_loss_and_grads(params, _batch(rng, [0, 0, 1, 1]), _grad_cfg(0.0))
    assert losses.total == losses.softmax_loss


def test_center_gradient_vanishes_at_the_center():
    rng = np.random.default_rng(4)
    params = init_params(GRAD_BACKBONE, INPUT_SHAPE, 3, 3, rng)
    batch = _batch(rng, [0, 1, 2])
    plain, plain_grads = joint_loss_and_grads(params, batch, _grad_cfg(0.0))
    joint, joint_grads = joint_loss_and_grads(params, batch, _grad_cfg(1.0))
    assert joint.center_loss == 0.0
    for name in params.names:
        np.testing.assert_array_equal(plain_grads[name], joint_grads[name])


def test_non_finite_features_raise_divergence():
    rng = np.random.default_rng(5)
    params = init_params(GRAD_BACKBONE, INPUT_SHAPE, 3, 2, rng)
    params.tensors["fc.W"][0, 0] = np.inf
    with pytest.raises(DivergenceError) as exc_info:
        joint_loss_and_grads(params, _batch(rng, [0, 0, 1, 1]), _grad_cfg())
    assert exc_info.value.batch == 0


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    n_classes = int(rng.integers(2, 4))
    class_ids = sorted(int(c) for c in rng.integers(0, n_classes, size=6))
    if len(set(class_ids)) < 2:
        class_ids[-1] = n_classes
    params = init_params(GRAD_BACKBONE, INPUT_SHAPE, 3, len(set(class_ids)), rng)
    batch = _batch(rng, class_ids)
    cfg = _grad_cfg(float(rng.uniform(0.1, 1.0)))
    _, grads = joint_loss_and_grads(params, batch, cfg)

    step = 1e-5
    for name in params.names:
        tensor = params.tensors[name]
        numeric = np.zeros_like(tensor)
        for index in np.ndindex(tensor.shape):
            original = tensor[index]
            tensor[index] = original + step
            plus = joint_loss_and_grads(params, batch, cfg)[0].total
            tensor[index] = original - step
            minus = joint_loss_and_grads(params, batch, cfg)[0].total
            tensor[index] = original
            numeric[index] = (plus - minus) / (2 * step)
        scale = max(np.linalg.norm(numeric) + np.linalg.norm(grads[name]), 1e-8)
        assert np.linalg.norm(numeric - grads[name]) / scale < 1e-4, name
