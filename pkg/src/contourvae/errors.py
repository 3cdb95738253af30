"""Exception hierarchy shared across the package."""


class ContourVAEError(Exception):
    """Base class for all package errors."""


class InvalidContourError(ContourVAEError, ValueError):
    """A polyline violates its invariants (too few points, zero length, ...)."""


class FormatError(ContourVAEError, ValueError):
    """An input file could not be parsed under its declared format."""

    def __init__(self, message, index=None):
        self.index = index
        if index is not None:
            message = f"{message} (record {index})"
        super().__init__(message)


class DataError(ContourVAEError, ValueError):
    """Input data is well formed but unusable (e.g. a member with no contour)."""


class NumericalError(ContourVAEError, ArithmeticError):
    """A computation produced non-finite values or diverged."""

    def __init__(self, message, epoch=None, history=None):
        self.epoch = epoch
        self.history = history if history is not None else []
        super().__init__(message)


class NestingViolationError(ContourVAEError):
    """Confidence bands are not nested across levels."""

    def __init__(self, count):
        self.count = count
        super().__init__(f"band nesting violated at {count} pixel(s)")


class CheckpointError(ContourVAEError):
    """A checkpoint is corrupt, truncated, or of an unsupported version."""
