"""Test configuration and fixtures.

This module provides small embedding sets, vocabularies, synthetic dataset
configurations and training configurations shared by the test suite.
"""

import numpy as np
import pytest

from xmodal.core.embeddings import embedding_set_from_arrays
from xmodal.schemas.embedding import EmbeddingSet, Modality
from xmodal.schemas.encoder import EncoderConfig, Vocabulary, WordVector
from xmodal.schemas.synth import SynthConfig
from xmodal.schemas.training import TrainConfig

TINY_BACKBONE = "pool:4,conv:4:tanh,pool:2"


def make_set(
    rows: list[tuple[int, int, Modality]], vectors: list[list[float]]
) -> EmbeddingSet:
    """Embedding set from ``(id, class_id, modality)`` rows and their vectors."""
    return embedding_set_from_arrays(
        [r[0] for r in rows],
        [r[1] for r in rows],
        [r[2] for r in rows],
        np.asarray(vectors, dtype=np.float64),
    )


@pytest.fixture
def perfect_set() -> EmbeddingSet:
    """Three classes of one image and one text each, paired vectors identical."""
    rows = [
        (0, 0, Modality.IMAGE),
        (1, 0, Modality.TEXT),
        (2, 1, Modality.IMAGE),
        (3, 1, Modality.TEXT),
        (4, 2, Modality.IMAGE),
        (5, 2, Modality.TEXT),
    ]
    vectors = [
        [1.0, 0.0, 0.0],
        [2.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 3.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 0.5],
    ]
    return make_set(rows, vectors)


@pytest.fixture
def caption_set() -> EmbeddingSet:
    """One image with five captions over each of two classes."""
    rng = np.random.default_rng(7)
    rows, vectors, next_id = [], [], 0
    for class_id in range(2):
        rows.append((next_id, class_id, Modality.IMAGE))
        vectors.append(rng.normal(size=4))
        next_id += 1
        for _ in range(5):
            rows.append((next_id, class_id, Modality.TEXT))
            vectors.append(rng.normal(size=4))
            next_id += 1
    return make_set(rows, vectors)


@pytest.fixture
def tiny_vocab() -> Vocabulary:
    """Three 15-dimensional words with distinct constant vectors."""
    values = {"red": 1.0, "green": 0.0, "blue": -1.0}
    return Vocabulary(
        dim=15,
        entries={
            word: WordVector(word=word, vector=np.full(15, value))
            for word, value in values.items()
        },
    )


@pytest.fixture
def small_encoder() -> EncoderConfig:
    return EncoderConfig(canvas_h=32, canvas_w=32, superpixel=1)


@pytest.fixture
def small_synth() -> SynthConfig:
    """Four classes on 32×32 canvases; quick enough to train in unit tests."""
    return SynthConfig(
        classes=4,
        images_per_class=2,
        texts_per_class=2,
        concept_dim=8,
        vocab_size=40,
        words_per_text=4,
        canvas_size=32,
        tiles=4,
        seed=3,
    )


@pytest.fixture
def tiny_train() -> TrainConfig:
    return TrainConfig(
        lr=0.01,
        epochs=3,
        batch=8,
        backbone=TINY_BACKBONE,
        feature_dim=8,
        seed=11,
    )


SMALL_RUN = """\
synth.classes=4
synth.images_per_class=2
synth.texts_per_class=2
synth.concept_dim=8
synth.vocab_size=40
synth.words_per_text=4
synth.canvas_size=32
synth.tiles=4
train.lr=0.005
train.lambda_center=0.5
train.epochs=2
train.batch=8
train.backbone=pool:4,conv:4:tanh,pool:2
train.feature_dim=8
metric.ks=1,2
"""


@pytest.fixture
def run_file(tmp_path):
    """Run configuration for the small synthetic dataset."""
    path = tmp_path / "run.cfg"
    path.write_text(SMALL_RUN)
    return path
