"""Exception hierarchy.

Everything raised on bad input derives from :class:`DataError` so the CLI can
map it to exit code 2; configuration and usage problems derive from
:class:`UsageError` (exit code 1).
"""

from __future__ import annotations


class BenchError(Exception):
    """Base class for all toolkit errors."""


class UsageError(BenchError):
    """Bad invocation or configuration."""


class ConfigError(UsageError, ValueError):
    pass


class DataError(BenchError):
    """Input data violates a documented format or contract.

    ``path`` is filled in by the loaders when the offending data came from a
    file, so messages always name the file.
    """

    def __init__(self, message: str, *, path=None):
        super().__init__(message)
        self.message = message
        self.path = path

    def with_path(self, path) -> "DataError":
        self.path = path
        return self

    def __str__(self) -> str:
        if self.path is not None:
            return f"{self.path}: {self.message}"
        return self.message


class IoFailure(DataError):
    pass


class InvalidDims(DataError, ValueError):
    def __init__(self, width, height, *, path=None):
        super().__init__(f"image dimensions must be positive, got {width}x{height}", path=path)
        self.width = width
        self.height = height


class LineError(DataError):
    """An error attached to a 1-based line number of a text file."""

    def __init__(self, line_number: int, reason: str, *, path=None):
        super().__init__(f"line {line_number}: {reason}", path=path)
        self.line_number = line_number
        self.reason = reason


class MalformedLine(LineError):
    pass


class CoordinateOutOfRange(MalformedLine):
    pass


class UnknownClass(LineError):
    def __init__(self, line_number: int, value, *, path=None):
        super().__init__(line_number, f"class {value!r} is not in the active class scheme", path=path)
        self.value = value


class ConfidenceOutOfRange(LineError):
    def __init__(self, line_number: int, value, *, path=None):
        super().__init__(line_number, f"confidence {value!r} outside [0, 1]", path=path)
        self.value = value


class CenterOutOfImage(DataError, ValueError):
    pass


class InvalidCrop(DataError, ValueError):
    pass


class DuplicateFrameId(DataError):
    pass


class MixedClasses(DataError, ValueError):
    pass


class InconsistentThreshold(DataError, ValueError):
    pass


class ZeroGroundTruth(DataError):
    """Average precision is undefined for a class with no ground truth."""


class MissingThresholdCurve(DataError, ValueError):
    pass


class UnknownFrameId(DataError, KeyError):
    def __init__(self, frame_id: str, *, path=None):
        super().__init__(f"detections reference unknown frame_id {frame_id!r}", path=path)
        self.frame_id = frame_id

    # KeyError.__str__ would repr() the message
    __str__ = DataError.__str__


class MalformedRow(DataError):
    def __init__(self, row_number: int, reason: str, *, path=None):
        super().__init__(f"row {row_number}: {reason}", path=path)
        self.row_number = row_number


class NegativeDuration(MalformedRow):
    pass


class MixedTimingLog(DataError):
    pass


class EmptyLog(DataError):
    pass


class EmptyInput(DataError):
    pass


class SchemaMismatch(DataError):
    pass
