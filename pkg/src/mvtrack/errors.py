"""Exception types raised across the pipeline."""

from __future__ import annotations


class MvtrackError(Exception):
    """Base class for all library errors."""


class ValidationError(MvtrackError):
    """Input failed a documented precondition (maps to CLI exit code 2)."""


class DegenerateConfiguration(ValidationError):
    def __init__(self, message: str, camera_id: str | None = None):
        super().__init__(message)
        self.camera_id = camera_id


class HorizonPoint(MvtrackError):
    """A pixel maps to infinity under the homography."""


class NoFeetVisible(MvtrackError):
    pass


class NumericalBreakdown(MvtrackError):
    pass


class EmptyComponent(MvtrackError):
    pass


class NonMonotonicTime(MvtrackError):
    pass


class DuplicateId(ValidationError):
    pass


class EmptyAccumulator(MvtrackError):
    pass


class EmptyInput(MvtrackError):
    pass


class DegenerateVariance(MvtrackError):
    pass


class WaypointOutsideSite(ValidationError):
    pass


class FormatError(ValidationError):
    """A malformed record in an input file."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line
        self.detail = message
