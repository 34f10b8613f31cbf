import enum

from pydantic import BaseModel, ConfigDict, Field, field_validator


class Augmentation(str, enum.Enum):
    """Training-set expansion schemes.

    - ``cfg-std``: every image and every encoded text as is.
    - ``cfg-2``: images plus their horizontal flips, encoded texts plus their
      227-crop enlargements.
    - ``cfg-3``: ``cfg-2`` with every input downsampled to half size
      (128×128 for 256×256 canvases).
    """

    CFG_STD = "cfg-std"
    CFG_2 = "cfg-2"
    CFG_3 = "cfg-3"


class DecayMode(str, enum.Enum):
    LR = "lr"
    L2 = "l2"


class CenterMode(str, enum.Enum):
    BATCH = "batch"
    EMA = "ema"


class LayerSpec(BaseModel):
    """One backbone stage: ``pool:<k>`` average pooling or ``conv:<c>[:act]``."""

    kind: str = Field(..., pattern="^(pool|conv)$")
    size: int = Field(..., ge=1)
    activation: str = Field(default="relu", pattern="^(relu|tanh)$")

    model_config = ConfigDict(frozen=True)


def parse_backbone(spec: str) -> tuple[LayerSpec, ...]:
    """Parse a backbone string such as ``"pool:4,conv:8:tanh"``.

    The empty string is a valid backbone: input flattened straight into the
    feature layer.
    """
    layers = []
    for part in filter(None, (p.strip() for p in spec.split(","))):
        fields = part.split(":")
        if len(fields) not in (2, 3) or not fields[1].isdigit():
            raise ValueError(f"malformed backbone stage '{part}'")
        if fields[0] == "pool" and len(fields) == 3:
            raise ValueError(f"pool stage takes no activation: '{part}'")
        layers.append(
            LayerSpec(
                kind=fields[0],
                size=int(fields[1]),
                **({"activation": fields[2]} if len(fields) == 3 else {}),
            )
        )
    return tuple(layers)


DEFAULT_BACKBONE = "pool:4,conv:8,pool:2,conv:16,pool:2,conv:16,pool:2"


class TrainConfig(BaseModel):
    lr: float = Field(default=0.05, gt=0)
    weight_decay: float = Field(default=5e-5, ge=0)
    decay_mode: DecayMode = DecayMode.LR
    epochs: int = Field(default=100, ge=0)
    batch: int = Field(default=45, ge=1)
    lambda_center: float = Field(default=0.1, ge=0)
    center_mode: CenterMode = CenterMode.BATCH
    center_alpha: float = Field(default=0.5, gt=0, le=1)
    augmentation: Augmentation = Augmentation.CFG_STD
    seed: int = 0
    backbone: str = DEFAULT_BACKBONE
    feature_dim: int = Field(default=128, ge=1)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)

    model_config = ConfigDict(frozen=True)

    @field_validator("backbone")
    @classmethod
    def _check_backbone(cls, value: str) -> str:
        parse_backbone(value)
        return value


class LossBreakdown(BaseModel):
    softmax_loss: float = Field(..., ge=0)
    center_loss: float = Field(..., ge=0)
    total: float

    model_config = ConfigDict(frozen=True)

    @classmethod
    def combine(
        cls, softmax_loss: float, center_loss: float, lambda_center: float
    ) -> "LossBreakdown":
        return cls(
            softmax_loss=softmax_loss,
            center_loss=center_loss,
            total=softmax_loss + lambda_center * center_loss,
        )


class EpochRecord(BaseModel):
    epoch: int = Field(..., ge=0)
    losses: LossBreakdown
    intra_class_distance: float = Field(default=0.0, ge=0)

    model_config = ConfigDict(frozen=True)
