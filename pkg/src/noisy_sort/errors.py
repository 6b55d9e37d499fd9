"""Exception hierarchy shared by every module."""

from __future__ import annotations


class NoisySortError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(NoisySortError, ValueError):
    """An argument violates a precondition (size mismatch, bad parameter)."""


class DataError(NoisySortError, ValueError):
    """Input data could not be parsed or is inconsistent."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingSignalError(DataError, KeyError):
    """A replayed signal source was asked for a pair it does not contain."""

    def __str__(self) -> str:
        return self.args[0]


class CapacityError(NoisySortError):
    """A request exceeds a configured computational limit."""


class WindowExhaustedError(CapacityError):
    """Window escalation reached its cap while the score was still improving.

    Carries the last two orders that were compared so callers can inspect how
    far apart they are.
    """

    def __init__(self, message: str, previous, improved, k: int) -> None:
        super().__init__(message)
        self.previous = previous
        self.improved = improved
        self.k = k
