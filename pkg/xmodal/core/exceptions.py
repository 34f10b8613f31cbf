"""Exception hierarchy.

Every error raised on purpose by xmodal derives from :class:`XModalError` and
carries the process exit code the command-line harness reports for it:
``1`` for runtime and metric failures, ``2`` for usage and validation failures.
"""

from typing import Optional


class XModalError(Exception):
    """Base class for all xmodal errors."""

    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigError(XModalError):
    exit_code = 2

    def __init__(self, detail: str, key: Optional[str] = None):
        super().__init__(detail)
        self.key = key


class EmbeddingFormatError(XModalError):
    """Malformed embedding TSV; ``line`` is 1-based."""

    exit_code = 2

    def __init__(self, detail: str, line: Optional[int] = None, path: str = ""):
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(f"{where}{detail}")
        self.line = line


class VocabularyError(XModalError):
    exit_code = 2

    def __init__(self, detail: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {detail}" if line is not None else detail)
        self.line = line


class CheckpointError(XModalError):
    exit_code = 2


class ZeroNormError(XModalError, ValueError):
    """A vector with zero Euclidean norm where a direction is required."""


class DimensionMismatchError(XModalError, ValueError):
    pass


class EmptyDescriptionError(XModalError):
    pass


class EncodingOverflowError(XModalError):
    def __init__(self, token: str, index: int):
        super().__init__(
            f"description overflows the canvas at token #{index} '{token}'"
        )
        self.token = token
        self.index = index


class CanvasSizeError(XModalError, ValueError):
    pass


class DivergenceError(XModalError):
    def __init__(self, detail: str, epoch: Optional[int] = None, batch: int = 0):
        where = f"epoch {epoch}, batch {batch}" if epoch is not None else f"batch {batch}"
        super().__init__(f"{detail} ({where})")
        self.reason = detail
        self.epoch = epoch
        self.batch = batch


class InsufficientEntriesError(XModalError):
    pass


class MetricError(XModalError):
    pass


class UnknownClassError(XModalError, KeyError):
    def __str__(self) -> str:
        return self.detail


class StageError(XModalError):
    """A pipeline stage failed; wraps the underlying error."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class DatasetError(XModalError):
    """Training or evaluation data violates a precondition."""

    exit_code = 2


class ModalityError(XModalError):
    """A set lacks the modality a retrieval direction needs."""
