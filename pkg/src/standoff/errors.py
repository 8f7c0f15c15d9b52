"""Exception hierarchy for the standoff framework.

Everything raised by the framework derives from :class:`StandoffError`, so
callers can catch one type at the boundary. Errors that are really misuse of
an API (bad offsets, malformed values) also derive from ``ValueError``.
"""

from __future__ import annotations


class StandoffError(Exception):
    """Base class for all framework errors."""


class SpanError(StandoffError, ValueError):
    """A span is malformed or out of bounds for its document."""


class AnnotationError(StandoffError, ValueError):
    """An annotation or attribute operation violated a store constraint."""


class MarkupError(StandoffError):
    """Markup could not be parsed or serialized.

    ``position`` is the byte offset into the input where the problem was
    detected, or ``None`` for errors without a useful location (export-side
    failures, for instance).
    """

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (byte {position})"
        super().__init__(message)
        self.position = position


class DescriptorError(StandoffError, ValueError):
    """A module descriptor failed to parse or validate."""


class CollectionError(StandoffError):
    """A collection operation failed (missing manifest, duplicate doc, I/O)."""


class PipelineError(StandoffError):
    """A pipeline could not be planned or executed."""


class WireProtocolError(PipelineError):
    """An external module violated the line-delimited JSON wire protocol.

    ``stderr`` holds whatever the module wrote to its error stream before the
    exchange broke down, for diagnosis in run reports.
    """

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr
