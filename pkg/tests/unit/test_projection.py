"""Unit tests for the 2-D projection dump."""

import numpy as np
import pytest

from tests.conftest import make_set
from xmodal.core.exceptions import DatasetError
from xmodal.core.projection import (
    PROJECTION_HEADER,
    dump_projection,
    project_2d,
    write_projection,
)
from xmodal.schemas.embedding import EmbeddingSet, Modality


def test_empty_set_is_rejected():
    with pytest.raises(DatasetError):
        project_2d(EmbeddingSet(dim=3))


def test_single_record_projects_to_origin():
    points = project_2d(make_set([(4, 1, Modality.TEXT)], [[1.0, 2.0, 3.0]]))
    assert [(p.id, p.x, p.y) for p in points] == [(4, 0.0, 0.0)]


def test_projection_keeps_identity_and_separates_classes(perfect_set):
    points = project_2d(perfect_set)
    assert [(p.id, p.class_id, p.modality) for p in points] == [
        (r.id, r.class_id, r.modality) for r in perfect_set.records
    ]
    coords = {p.id: (p.x, p.y) for p in points}
    # same-direction vectors coincide after normalization
    np.testing.assert_allclose(coords[0], coords[1], atol=1e-12)
    np.testing.assert_allclose(coords[4], coords[5], atol=1e-12)
    assert not np.allclose(coords[0], coords[2])


def test_projection_is_deterministic(caption_set):
    assert dump_projection(project_2d(caption_set)) == dump_projection(
        project_2d(caption_set)
    )


def test_write_projection(tmp_path, caption_set):
    path = tmp_path / "projection.tsv"
    write_projection(project_2d(caption_set), path)
    lines = path.read_text().splitlines()
    assert lines[0] == PROJECTION_HEADER
    assert len(lines) == 1 + caption_set.total
    assert lines[1].split("\t")[:3] == ["0", "0", "image"]
