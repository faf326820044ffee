"""Exception hierarchy shared by every module."""

from __future__ import annotations


class CritnormError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(CritnormError, ValueError):
    """Array shape or grid mismatch."""


class ParameterError(CritnormError, ValueError):
    """Numeric parameter outside its admissible range."""


class ConfigurationError(CritnormError, ValueError):
    """Ill-formed operator or run configuration."""


class ValidationError(CritnormError, ValueError):
    """Input violates a structural invariant (e.g. solenoidality)."""


class BlowUpSuspected(CritnormError, RuntimeError):
    """Non-finite values appeared during time stepping.

    ``last_state`` holds the most recent finite state.
    """

    def __init__(self, message: str, last_state=None, step: int | None = None):
        super().__init__(message)
        self.last_state = last_state
        self.step = step
