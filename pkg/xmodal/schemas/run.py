import enum
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from xmodal.schemas.encoder import EncoderConfig
from xmodal.schemas.metrics import MetricConfig
from xmodal.schemas.synth import SynthConfig
from xmodal.schemas.training import TrainConfig


class Source(str, enum.Enum):
    SYNTH = "synth"
    MANIFEST = "manifest"


class RunSection(BaseModel):
    """``run.*`` keys: where the pipeline's data comes from."""

    source: Source = Source.SYNTH
    manifest: Optional[Path] = None
    vocab: Optional[Path] = None
    images: Optional[Path] = None
    k_max: Optional[int] = Field(default=None, ge=1)

    model_config = ConfigDict(frozen=True, extra="forbid")


class RunConfig(BaseModel):
    """All sections of a run configuration.

    ``provided`` holds every key that was set explicitly, in the file or by
    a command-line flag.
    """

    train: TrainConfig = TrainConfig()
    encoder: EncoderConfig = EncoderConfig()
    metric: MetricConfig = MetricConfig()
    synth: SynthConfig = SynthConfig()
    run: RunSection = RunSection()
    path: Optional[Path] = None
    provided: frozenset[str] = frozenset()

    model_config = ConfigDict(frozen=True)
