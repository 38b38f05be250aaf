from typing import Optional


class QuadMetricError(Exception):
    """Base class for every error raised by the toolkit."""


class MalformedInputError(QuadMetricError, ValueError):
    """Vectors or matrices with the wrong shape or non-finite entries."""


class ConfigurationError(QuadMetricError, ValueError):
    """A parameter combination the algorithms cannot work with."""


class DegenerateDatasetError(QuadMetricError):
    """The data cannot supply a valid quadruplet for some reference."""

    def __init__(
        self,
        message: str,
        coarse: Optional[int] = None,
        fine: Optional[int] = None,
    ):
        self.coarse = coarse
        self.fine = fine
        if coarse is not None or fine is not None:
            message = f"{message} (coarse={coarse}, fine={fine})"
        super().__init__(message)


class DataFormatError(QuadMetricError, ValueError):
    """A dataset, embedding or checkpoint file violates its grammar."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DatasetValidationError(QuadMetricError, ValueError):
    """Records are well formed but inconsistent with the label hierarchy."""


class EmptyDatasetError(DataFormatError):
    pass


class InsufficientDataError(QuadMetricError, ValueError):
    """A metric was requested on a set too small to define it."""


class NonFiniteLossError(QuadMetricError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, epoch: int, step: int, loss: float):
        self.epoch = epoch
        self.step = step
        self.loss = loss
        super().__init__(
            f"non-finite loss {loss!r} at epoch {epoch}, step {step}; "
            "lower the learning rate or enable normalize_embeddings"
        )
