"""Exception types shared across the package."""

from __future__ import annotations


class HvError(Exception):
    """Base class for all errors raised by this package."""


class ModelLookupError(HvError, KeyError):
    """An element id passed by the caller does not resolve.

    This signals a caller bug (or a stale id), never a model inconsistency:
    inconsistencies are reported as diagnostics, not exceptions.
    """

    def __str__(self) -> str:  # KeyError quotes its repr by default
        return Exception.__str__(self)


class ModelIdMismatchError(HvError, ValueError):
    """Two snapshots given to ``diff`` belong to different models."""


class StaleEventError(HvError):
    """A change event does not apply to the current snapshot."""

    def __init__(self, message: str, *, seq: int | None = None, element_id: str | None = None):
        super().__init__(message)
        self.seq = seq
        self.element_id = element_id


class ResyncRequiredError(HvError):
    """The event/delta stream has a gap; the caller must refetch state."""


class DeltaInconsistentError(HvError):
    """A diagnostic delta contradicts the stored current set."""
