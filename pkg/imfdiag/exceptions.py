"""Exceptions."""

# region #-- imports --#
from __future__ import annotations

from typing import Any

from .const import ExitCode

# endregion


class ImfDiagError(Exception):
    """Base Error."""

    exit_code: ExitCode = ExitCode.DATA

    def __init__(self, message: str, context: Any = None) -> None:
        """Initialise."""
        super().__init__(f"{message} ({context})" if context is not None else message)

        self.context = context


class ConfigError(ImfDiagError):
    """Represents an invalid configuration."""

    exit_code = ExitCode.USAGE

    def __init__(self, message: str, context: Any = None) -> None:
        """Initialise."""
        super().__init__(message=f"Invalid configuration: {message}", context=context)


class DataError(ImfDiagError):
    """Base error for input data problems."""


class ParseError(DataError):
    """A file could not be parsed."""

    def __init__(self, path: Any, location: str, message: str) -> None:
        """Initialise."""
        super().__init__(message=f"{message} at {location}", context=path)

        self.location = location


class NonFiniteError(DataError):
    """A signal contains NaN or infinite samples."""

    def __init__(self, context: Any, index: int) -> None:
        """Initialise."""
        super().__init__(message=f"Non-finite sample at index {index}", context=context)

        self.index = index


class SignalTooShortError(DataError):
    """A signal has fewer samples than an operation needs."""

    def __init__(self, context: Any, length: int, required: int) -> None:
        """Initialise."""
        super().__init__(
            message=f"Signal too short: {length} samples, {required} required",
            context=context,
        )


class EmptyPartitionError(DataError):
    """A dataset split would produce an empty partition."""

    def __init__(self, partition: str, size: int) -> None:
        """Initialise."""
        super().__init__(message=f"Empty {partition} partition", context=f"n={size}")


class DatasetStateError(DataError):
    """A dataset is (or is not) decomposed when the opposite is required."""

    def __init__(self, expected_decomposed: bool) -> None:
        """Initialise."""
        state = "decomposed" if expected_decomposed else "raw"
        super().__init__(message=f"Dataset must be {state}")


class ShapeError(DataError):
    """Array shapes do not agree."""

    def __init__(self, context: Any, expected: Any, actual: Any) -> None:
        """Initialise."""
        super().__init__(
            message=f"Shape mismatch: expected {expected}, got {actual}",
            context=context,
        )


class DecompositionError(ImfDiagError):
    """A signal could not be decomposed."""


class NotEnoughExtremaError(DecompositionError):
    """Too few extrema to build envelopes; the caller treats the signal as residual."""

    def __init__(self, found: int, required: int) -> None:
        """Initialise."""
        super().__init__(
            message=f"Not enough extrema to sift: {found} found, {required} required"
        )


class NumericError(ImfDiagError):
    """Training diverged to a non-finite value."""

    exit_code = ExitCode.NUMERIC

    def __init__(self, context: Any) -> None:
        """Initialise."""
        super().__init__(message="Non-finite loss encountered", context=context)
