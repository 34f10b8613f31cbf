"""Text-to-image encoding.

A description is rendered onto a black canvas word by word. Each word's
embedding vector is quantized component-wise to bytes and consecutive
component triples become the (R, G, B) of consecutive logical pixels, so a
``d``-dimensional vector occupies ``ceil(d / 3)`` logical pixels. A logical
pixel is drawn as a ``superpixel × superpixel`` block. Words flow left to
right, separated by ``word_gap`` logical pixels, and wrap to a new row when
the next block would overflow the canvas width.
"""

import io
import logging
import math
import string
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from xmodal.core.exceptions import (
    CanvasSizeError,
    EmptyDescriptionError,
    EncodingOverflowError,
    VocabularyError,
)
from xmodal.core.files import write_bytes_atomic, write_text_atomic
from xmodal.schemas.encoder import (
    AugmentMode,
    EncodedTextImage,
    EncoderConfig,
    Vocabulary,
    WordVector,
)

logger = logging.getLogger(__name__)

CROP_SIZE = 227

_PUNCTUATION = str.maketrans("", "", string.punctuation)


def tokenize(text: str) -> list[str]:
    """Lowercase, strip ASCII punctuation and split on whitespace."""
    return text.lower().translate(_PUNCTUATION).split()


def _is_header(parts: list[str]) -> bool:
    if len(parts) != 2:
        return False
    return all(p.isdigit() for p in parts)


def parse_vocabulary(text: str) -> Vocabulary:
    """Parse the word-vector text format (``word v_1 ... v_d`` per line).

    An optional first line ``<count> <dim>`` is accepted.
    """
    entries: dict[str, WordVector] = {}
    dim: int | None = None
    declared_count: int | None = None
    for number, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if number == 1 and _is_header(parts):
            declared_count, dim = int(parts[0]), int(parts[1])
            if dim < 1:
                raise VocabularyError("dimension must be at least 1", number)
            continue
        word, values = parts[0], parts[1:]
        if not values:
            raise VocabularyError(f"word '{word}' has no components", number)
        if dim is None:
            dim = len(values)
        if len(values) != dim:
            raise VocabularyError(
                f"word '{word}' has {len(values)} components, expected {dim}", number
            )
        if word in entries:
            raise VocabularyError(f"duplicate word '{word}'", number)
        try:
            entries[word] = WordVector(word=word, vector=[float(v) for v in values])
        except ValueError as e:
            raise VocabularyError(f"invalid vector for '{word}': {e}", number)
    if dim is None:
        raise VocabularyError("vocabulary is empty")
    if declared_count is not None and declared_count != len(entries):
        logger.warning(
            f"Vocabulary header declares {declared_count} words, found {len(entries)}"
        )
    return Vocabulary(dim=dim, entries=entries)


def load_vocabulary(path: str | Path) -> Vocabulary:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise VocabularyError(f"cannot read {path}: {e}")
    vocab = parse_vocabulary(text)
    logger.info(f"Loaded {len(vocab)} word vectors (dim {vocab.dim}) from {path}")
    return vocab


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    """Write the word-vector text format; floats use their shortest exact form."""
    lines = [f"{len(vocab)} {vocab.dim}"]
    for word, entry in vocab.entries.items():
        lines.append(" ".join([word, *(repr(float(v)) for v in entry.vector)]))
    write_text_atomic(path, "\n".join(lines) + "\n")


def quantize_vector(values: np.ndarray, cfg: EncoderConfig) -> np.ndarray:
    """Clamp to ``[value_min, value_max]`` and map linearly onto 0..255."""
    clamped = np.clip(np.asarray(values, dtype=np.float64), cfg.value_min, cfg.value_max)
    scaled = (clamped - cfg.value_min) / (cfg.value_max - cfg.value_min) * 255.0
    # round half up
    return np.floor(scaled + 0.5).astype(np.uint8)


def quantize_component(value: float, cfg: EncoderConfig) -> int:
    return int(quantize_vector(np.array([value]), cfg)[0])


def encode_word(word: WordVector, cfg: EncoderConfig) -> np.ndarray:
    """Render one word as a ``ceil(d/3) × 3`` block of logical RGB pixels.

    Missing channels of the last pixel are 0 when ``d`` is not a multiple of 3.
    """
    width = math.ceil(word.dim / 3)
    channels = np.zeros(width * 3, dtype=np.uint8)
    channels[: word.dim] = quantize_vector(word.vector, cfg)
    return channels.reshape(width, 3)


def encode_description(
    tokens: Sequence[str], vocab: Vocabulary, cfg: EncoderConfig
) -> EncodedTextImage:
    """Encode a tokenized description as an image.

    Out-of-vocabulary tokens are skipped and reported on the returned image
    (and logged as a warning).

    Raises:
        EmptyDescriptionError: No token is in the vocabulary.
        EncodingOverflowError: The description does not fit vertically.
        CanvasSizeError: A single word block is wider than the canvas.
    """
    if not cfg.fits(vocab.dim):
        raise CanvasSizeError(
            f"a {vocab.dim}-dim word block ({cfg.block_width(vocab.dim)} pixels × "
            f"superpixel {cfg.superpixel}) is wider than the canvas ({cfg.canvas_w})"
        )
    s = cfg.superpixel
    canvas = np.zeros((cfg.canvas_h, cfg.canvas_w, 3), dtype=np.uint8)
    oov: list[str] = []
    placed = 0
    row = col = 0
    for index, token in enumerate(tokens):
        entry = vocab.get(token)
        if entry is None:
            oov.append(token)
            continue
        block = encode_word(entry, cfg)
        width = block.shape[0]
        if col > 0 and col + width > cfg.grid_w:
            row += 1 + cfg.word_gap
            col = 0
        if row >= cfg.grid_h:
            raise EncodingOverflowError(token, index)
        canvas[row * s : (row + 1) * s, col * s : (col + width) * s] = np.repeat(
            block, s, axis=0
        )[None, :, :]
        col += width + cfg.word_gap
        placed += 1

    if placed == 0:
        raise EmptyDescriptionError(
            "description has no in-vocabulary tokens"
            if tokens
            else "description is empty"
        )
    if oov:
        logger.warning(f"Skipped {len(oov)} out-of-vocabulary token(s): {oov[:5]}")
    return EncodedTextImage(pixels=canvas, oov_tokens=tuple(oov))


def encode_descriptions(
    descriptions: Sequence[Sequence[str]],
    vocab: Vocabulary,
    cfg: EncoderConfig,
    workers: int = 1,
) -> list[EncodedTextImage]:
    """Encode many descriptions; output order follows input order."""
    if workers <= 1 or len(descriptions) <= 1:
        return [encode_description(tokens, vocab, cfg) for tokens in descriptions]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(
            pool.map(lambda tokens: encode_description(tokens, vocab, cfg), descriptions)
        )


def _enlarge_index(size: int, source: int) -> np.ndarray:
    # nearest neighbour: destination pixel centre mapped into the source
    index = np.floor((np.arange(size) + 0.5) * source / size).astype(np.int64)
    return np.minimum(index, source - 1)


def augment_canvas(pixels: np.ndarray, mode: AugmentMode | str) -> np.ndarray:
    """Apply one augmentation to an ``H × W × 3`` byte canvas.

    - ``crop227_enlarge``: centred 227×227 crop resized back to ``H × W`` with
      nearest-neighbour sampling.
    - ``hflip``: columns mirrored.
    - ``downsample128``: halved in both dimensions by 2×2 block averaging,
      rounded half up (256×256 becomes 128×128).

    Raises:
        CanvasSizeError: Canvas too small to crop, or odd-sized for downsampling.
    """
    mode = AugmentMode(mode)
    h, w = pixels.shape[:2]
    if mode == AugmentMode.HFLIP:
        return pixels[:, ::-1].copy()
    if mode == AugmentMode.CROP227_ENLARGE:
        if h < CROP_SIZE or w < CROP_SIZE:
            raise CanvasSizeError(
                f"cannot crop {CROP_SIZE}×{CROP_SIZE} from a {h}×{w} canvas"
            )
        top, left = (h - CROP_SIZE) // 2, (w - CROP_SIZE) // 2
        crop = pixels[top : top + CROP_SIZE, left : left + CROP_SIZE]
        rows = _enlarge_index(h, CROP_SIZE)
        cols = _enlarge_index(w, CROP_SIZE)
        return crop[rows][:, cols].copy()
    if h % 2 or w % 2:
        raise CanvasSizeError(f"cannot 2×2-average a {h}×{w} canvas")
    blocks = pixels.astype(np.uint16).reshape(h // 2, 2, w // 2, 2, 3).sum(axis=(1, 3))
    return ((blocks + 2) // 4).astype(np.uint8)


def augment_encoded(image: EncodedTextImage, mode: AugmentMode | str) -> EncodedTextImage:
    return EncodedTextImage(
        pixels=augment_canvas(image.pixels, mode), oov_tokens=image.oov_tokens
    )


def ppm_bytes(pixels: np.ndarray) -> bytes:
    h, w = pixels.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(pixels).tobytes()


def write_ppm(pixels: np.ndarray, path: str | Path) -> None:
    """Write a binary (P6) PPM file."""
    write_bytes_atomic(path, ppm_bytes(pixels))


def read_ppm(path: str | Path) -> np.ndarray:
    """Read a binary (P6) PPM file with maxval 255."""
    data = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4 and pos < len(data):
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            newline = data.find(b"\n", pos)
            pos = len(data) if newline < 0 else newline + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    fields = [f for f in fields if f]
    if len(fields) < 4 or fields[0] != b"P6" or fields[3] != b"255":
        raise CanvasSizeError(f"{path}: not a P6 PPM with maxval 255")
    if not (fields[1].isdigit() and fields[2].isdigit()):
        raise CanvasSizeError(f"{path}: malformed PPM size {fields[1]!r}×{fields[2]!r}")
    w, h = int(fields[1]), int(fields[2])
    body = data[pos + 1 : pos + 1 + w * h * 3]
    if len(body) != w * h * 3:
        raise CanvasSizeError(f"{path}: truncated pixel data")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy()


def export_png(pixels: np.ndarray, path: str | Path) -> None:
    buffer = io.BytesIO()
    Image.fromarray(pixels).save(buffer, format="PNG")
    write_bytes_atomic(path, buffer.getvalue())
