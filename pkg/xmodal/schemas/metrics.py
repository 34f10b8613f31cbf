import enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from xmodal.schemas.retrieval import Direction


class ReportScale(str, enum.Enum):
    UNIT = "unit"
    PERCENT = "percent"


class MetricConfig(BaseModel):
    ks: tuple[int, ...] = (1, 5, 10)
    report_scale: ReportScale = ReportScale.UNIT
    exclude_pairs: bool = True

    model_config = ConfigDict(frozen=True)

    @field_validator("ks", mode="before")
    @classmethod
    def _parse_ks(cls, value):
        if isinstance(value, str):
            value = [part for part in value.split(",") if part.strip()]
        return tuple(int(k) for k in value)

    @field_validator("ks")
    @classmethod
    def _check_ks(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value:
            raise ValueError("at least one K is required")
        if value[0] < 1:
            raise ValueError("K values must be positive")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("K values must be strictly increasing")
        return value

    @property
    def k_max(self) -> int:
        return self.ks[-1]


class MetricReport(BaseModel):
    """Metrics of one retrieval direction.

    ``recall`` is always a percentage. The two λ families are stored at the
    configured ``scale``: unit (``[-1, 1]``) or percent (``[-100, 100]``).
    """

    direction: Direction
    n_queries: int = Field(..., ge=0)
    recall: dict[int, float]
    semantic_map: dict[int, float]
    semantic_map_excluded: Optional[dict[int, float]] = None
    scale: ReportScale = ReportScale.UNIT

    model_config = ConfigDict(frozen=True)

    @field_validator("recall")
    @classmethod
    def _check_recall(cls, value: dict[int, float]) -> dict[int, float]:
        for k, r in value.items():
            if not 0.0 <= r <= 100.0:
                raise ValueError(f"R@{k} = {r} outside [0, 100]")
        return value

    @model_validator(mode="after")
    def _check_lambda(self) -> "MetricReport":
        bound = 100.0 if self.scale == ReportScale.PERCENT else 1.0
        for name in ("semantic_map", "semantic_map_excluded"):
            for k, v in (getattr(self, name) or {}).items():
                if abs(v) > bound * (1.0 + 1e-9):
                    raise ValueError(f"{name} at K={k} = {v} outside [-{bound:g}, {bound:g}]")
        return self

    @property
    def ks(self) -> tuple[int, ...]:
        return tuple(self.recall)

    def rescaled(self, scale: ReportScale | str) -> "MetricReport":
        """The same report with λ values at another scale."""
        scale = ReportScale(scale)
        if scale == self.scale:
            return self
        factor = 100.0 if scale == ReportScale.PERCENT else 0.01

        def convert(values: Optional[dict[int, float]]) -> Optional[dict[int, float]]:
            if values is None:
                return None
            return {k: v * factor for k, v in values.items()}

        return self.model_copy(
            update={
                "semantic_map": convert(self.semantic_map),
                "semantic_map_excluded": convert(self.semantic_map_excluded),
                "scale": scale,
            }
        )
