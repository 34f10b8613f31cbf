"""Published COCO-1k reference scores, shown beneath reports for context.

Values are percentages; λ rows use the percent scale. They are display
constants only and are never compared against computed results.
"""

from pydantic import BaseModel, ConfigDict

from xmodal.schemas.retrieval import Direction


class ReferenceRow(BaseModel):
    label: str
    metric: str
    values: dict[Direction, tuple[float, float, float]]

    model_config = ConfigDict(frozen=True)


REFERENCE_KS = (1, 5, 10)

BASELINE = "two-branch baseline"

REFERENCE_ROWS: tuple[ReferenceRow, ...] = (
    ReferenceRow(
        label=BASELINE,
        metric="recall",
        values={
            Direction.IMAGE_TO_TEXT: (50.1, 79.7, 89.2),
            Direction.TEXT_TO_IMAGE: (39.6, 75.2, 86.9),
        },
    ),
    ReferenceRow(
        label="single-stream cfg-std",
        metric="recall",
        values={
            Direction.IMAGE_TO_TEXT: (13.2, 30.4, 41.9),
            Direction.TEXT_TO_IMAGE: (12.2, 33.0, 46.7),
        },
    ),
    ReferenceRow(
        label="single-stream cfg-2",
        metric="recall",
        values={
            Direction.IMAGE_TO_TEXT: (13.0, 32.9, 46.0),
            Direction.TEXT_TO_IMAGE: (12.94, 36.62, 49.94),
        },
    ),
    ReferenceRow(
        label="single-stream cfg-3",
        metric="recall",
        values={
            Direction.IMAGE_TO_TEXT: (40.0, 64.4, 76.7),
            Direction.TEXT_TO_IMAGE: (30.9, 62.7, 73.7),
        },
    ),
    ReferenceRow(
        label=BASELINE,
        metric="lambda",
        values={
            Direction.IMAGE_TO_TEXT: (67.24, 64.63, 62.74),
            Direction.TEXT_TO_IMAGE: (64.07, 59.29, 56.30),
        },
    ),
    ReferenceRow(
        label="single-stream cfg-3",
        metric="lambda",
        values={
            Direction.IMAGE_TO_TEXT: (68.67, 65.25, 62.86),
            Direction.TEXT_TO_IMAGE: (66.70, 59.42, 54.46),
        },
    ),
    ReferenceRow(
        label=BASELINE,
        metric="lambda_excl",
        values={
            Direction.IMAGE_TO_TEXT: (64.94, 62.61, 61.02),
            Direction.TEXT_TO_IMAGE: (61.88, 58.01, 55.34),
        },
    ),
    ReferenceRow(
        label="single-stream cfg-3",
        metric="lambda_excl",
        values={
            Direction.IMAGE_TO_TEXT: (67.57, 64.17, 61.81),
            Direction.TEXT_TO_IMAGE: (65.42, 58.36, 53.55),
        },
    ),
)


def reference(label: str, metric: str, direction: Direction, k: int) -> float:
    """Look up one published value.

    Raises:
        KeyError: No such row or ``k`` not among ``REFERENCE_KS``.
    """
    if k not in REFERENCE_KS:
        raise KeyError(f"no reference value for K={k}")
    for row in REFERENCE_ROWS:
        if row.label == label and row.metric == metric:
            return row.values[direction][REFERENCE_KS.index(k)]
    raise KeyError(f"no reference row '{label}' / '{metric}'")
