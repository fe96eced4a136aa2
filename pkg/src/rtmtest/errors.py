"""Exception hierarchy shared by all rtmtest modules."""

from __future__ import annotations


class RTMError(Exception):
    """Base class for every error raised by rtmtest."""


class InvalidArgumentError(RTMError, ValueError):
    pass


class NotFoundError(RTMError, LookupError):
    pass


class DuplicateIdError(RTMError, ValueError):
    pass


class DanglingEndpointError(RTMError, ValueError):
    """A connector or annotation refers to an element that does not exist."""


class ParseError(RTMError, ValueError):
    """Malformed input document; carries the 1-based position when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class InconsistentDiffError(RTMError, ValueError):
    pass


class UnknownConstraintError(RTMError, LookupError):
    pass


class UnknownPredicateError(RTMError, LookupError):
    pass


class OrderViolationError(RTMError, ValueError):
    """Snapshot appended out of MONITORED < ANALYZED < PLANNED order."""


class UnsplittableInputError(RTMError, ValueError):
    pass


class SetupError(RTMError):
    pass


class CampaignComplete(RTMError):
    """Raised by the environment step when the automaton sits in a terminal state."""


class NotReplayableError(RTMError):
    pass
