import enum
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class AugmentMode(str, enum.Enum):
    CROP227_ENLARGE = "crop227_enlarge"
    HFLIP = "hflip"
    DOWNSAMPLE128 = "downsample128"


class EncoderConfig(BaseModel):
    canvas_h: int = Field(default=256, ge=1)
    canvas_w: int = Field(default=256, ge=1)
    superpixel: int = Field(default=4, ge=1)
    word_gap: int = Field(default=1, ge=0)
    value_min: float = -1.0
    value_max: float = 1.0

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_range(self) -> "EncoderConfig":
        if not self.value_max > self.value_min:
            raise ValueError("value_max must be greater than value_min")
        if self.superpixel > min(self.canvas_h, self.canvas_w):
            raise ValueError("superpixel larger than the canvas")
        return self

    @property
    def grid_w(self) -> int:
        """Canvas width in logical pixels."""
        return self.canvas_w // self.superpixel

    @property
    def grid_h(self) -> int:
        return self.canvas_h // self.superpixel

    def block_width(self, dim: int) -> int:
        return math.ceil(dim / 3)

    def fits(self, dim: int) -> bool:
        return self.block_width(dim) * self.superpixel <= self.canvas_w


class WordVector(BaseModel):
    word: str = Field(..., min_length=1)
    vector: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("vector", mode="before")
    @classmethod
    def _as_float64(cls, value) -> np.ndarray:
        vector = np.array(value, dtype=np.float64)
        if vector.ndim != 1 or vector.size == 0:
            raise ValueError("word vector must be a non-empty 1-D array")
        if not np.all(np.isfinite(vector)):
            raise ValueError("word vector has a non-finite component")
        vector.setflags(write=False)
        return vector

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


class Vocabulary(BaseModel):
    dim: int = Field(..., ge=1)
    entries: dict[str, WordVector] = Field(default_factory=dict)

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _check_entries(self) -> "Vocabulary":
        for token, entry in self.entries.items():
            if token != entry.word:
                raise ValueError(f"entry key '{token}' differs from word '{entry.word}'")
            if entry.dim != self.dim:
                raise ValueError(
                    f"word '{token}' has dimension {entry.dim}, expected {self.dim}"
                )
        return self

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, token: str) -> WordVector | None:
        return self.entries.get(token)


class EncodedTextImage(BaseModel):
    """An ``H × W × 3`` byte canvas rendered from a description."""

    pixels: np.ndarray
    oov_tokens: tuple[str, ...] = ()

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("pixels")
    @classmethod
    def _check_pixels(cls, value: np.ndarray) -> np.ndarray:
        if value.dtype != np.uint8 or value.ndim != 3 or value.shape[2] != 3:
            raise ValueError("pixels must be an H×W×3 uint8 array")
        return value

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])
