"""Unit tests for dataset manifests and canvas loading."""

import numpy as np
import pytest

from xmodal.core.dataset import (
    MANIFEST_HEADER,
    load_canvases,
    parse_manifest,
    read_encoder_config,
    read_manifest,
    write_encoder_config,
    write_manifest,
)
from xmodal.core.encoder import write_ppm
from xmodal.core.exceptions import DatasetError
from xmodal.schemas.dataset import ManifestEntry
from xmodal.schemas.embedding import Modality
from xmodal.schemas.encoder import EncoderConfig


def test_parse_manifest_with_and_without_header():
    body = "0\t3\timage\timages/0.ppm\n1\t3\ttext\tred green\tblue\n"
    for text in (body, f"{MANIFEST_HEADER}\n{body}"):
        entries = parse_manifest(text)
        assert [(e.id, e.class_id, e.modality) for e in entries] == [
            (0, 3, Modality.IMAGE),
            (1, 3, Modality.TEXT),
        ]
        assert entries[1].value == "red green\tblue"


@pytest.mark.parametrize(
    "text, line",
    [
        ("0\t3\timage\n", 1),
        ("0\t3\timage\ta.ppm\nx\t3\ttext\tred\n", 2),
        ("0\t3\tvideo\ta.mp4\n", 1),
        ("0\t3\timage\ta.ppm\n\n0\t4\ttext\tred\n", 3),
    ],
)
def test_parse_manifest_errors_name_the_line(text, line):
    with pytest.raises(DatasetError) as exc_info:
        parse_manifest(text, "m.tsv")
    assert f"m.tsv:{line}:" in str(exc_info.value)


def test_manifest_file_round_trip(tmp_path):
    entries = [
        ManifestEntry(id=0, class_id=1, modality=Modality.IMAGE, value="images/0.ppm"),
        ManifestEntry(id=1, class_id=1, modality=Modality.TEXT, value="red blue"),
    ]
    path = tmp_path / "manifest.tsv"
    write_manifest(entries, path)
    assert path.read_text().splitlines()[0] == MANIFEST_HEADER
    assert read_manifest(path) == entries


def test_read_missing_manifest(tmp_path):
    with pytest.raises(DatasetError):
        read_manifest(tmp_path / "missing.tsv")


def test_load_canvases(tmp_path, tiny_vocab, small_encoder):
    pixels = np.full((32, 32, 3), 7, dtype=np.uint8)
    write_ppm(pixels, tmp_path / "images" / "0.ppm")
    entries = parse_manifest("0\t0\timage\timages/0.ppm\n1\t0\ttext\tRed, green!\n")
    canvases = load_canvases(entries, tiny_vocab, small_encoder, tmp_path)
    assert [c.id for c in canvases] == [0, 1]
    np.testing.assert_array_equal(canvases[0].pixels, pixels)
    assert canvases[1].shape == (32, 32, 3)
    assert canvases[1].modality == Modality.TEXT


def test_load_canvases_errors(tmp_path, small_encoder):
    images = parse_manifest("0\t0\timage\tmissing.ppm\n")
    with pytest.raises(DatasetError):
        load_canvases(images, None, small_encoder, tmp_path)
    texts = parse_manifest("0\t0\ttext\tred\n")
    with pytest.raises(DatasetError):
        load_canvases(texts, None, small_encoder, tmp_path)


def test_encoder_config_round_trip(tmp_path):
    assert read_encoder_config(tmp_path) is None
    encoder = EncoderConfig(canvas_h=64, canvas_w=48, superpixel=2, word_gap=0)
    write_encoder_config(encoder, tmp_path)
    assert read_encoder_config(tmp_path) == encoder


def test_invalid_encoder_config(tmp_path):
    (tmp_path / "encoder.env").write_text("encoder.canvas_h=0\n")
    with pytest.raises(DatasetError):
        read_encoder_config(tmp_path)
