import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from xmodal.schemas.embedding import Modality


class ManifestEntry(BaseModel):
    """One manifest row: an image path or a caption, with its class."""

    id: int = Field(..., ge=0)
    class_id: int = Field(..., ge=0)
    modality: Modality
    value: str

    model_config = ConfigDict(frozen=True)


class LabeledCanvas(BaseModel):
    """An input canvas (natural or encoded-text image) with its identity."""

    id: int = Field(..., ge=0)
    class_id: int = Field(..., ge=0)
    modality: Modality
    pixels: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("pixels")
    @classmethod
    def _check_pixels(cls, value: np.ndarray) -> np.ndarray:
        if value.dtype != np.uint8 or value.ndim != 3 or value.shape[2] != 3:
            raise ValueError("pixels must be an H×W×3 uint8 array")
        return value

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.pixels.shape)
