"""Exception hierarchy shared by every storydeck module."""

from __future__ import annotations


class StorydeckError(Exception):
    """Base class for all storydeck errors.

    ``code`` is the stable machine identifier used in service error bodies
    and CLI diagnostics; it defaults to the class name.
    """

    code = "error"

    def __init__(self, message: str, **detail):
        super().__init__(message)
        self.message = message
        self.detail = detail

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        cls.code = cls.__name__


# ---------------------------------------------------------------------------
# core model / ingestion

class DuplicateColumn(StorydeckError):
    pass


class EmptyDataset(StorydeckError):
    pass


class RaggedRow(StorydeckError):
    pass


class InvalidCell(StorydeckError):
    """A cell cannot be coerced to its column's declared kind."""


class UnknownColumn(StorydeckError):
    pass


class ParseError(StorydeckError):
    """Malformed input document; carries a 1-based line number when known."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}", line=line, reason=reason)
        self.line = line
        self.reason = reason


class EncodingError(StorydeckError):
    pass


class MissingEncoding(StorydeckError):
    pass


class UnsupportedMark(StorydeckError):
    pass


class EmptySelection(StorydeckError):
    pass


# ---------------------------------------------------------------------------
# meta relations / organization

class EmptyFactSet(StorydeckError):
    pass


class MalformedResponse(StorydeckError):
    pass


class InvalidScoreRange(StorydeckError):
    pass


class ZeroWeights(StorydeckError):
    pass


class DuplicateFact(StorydeckError):
    pass


class OutOfRange(StorydeckError):
    pass


class CapacityExceeded(StorydeckError):
    pass


class LockViolation(StorydeckError):
    pass


# ---------------------------------------------------------------------------
# gateway

class GatewayError(StorydeckError):
    """Any failure of the completion backend; callers degrade gracefully."""


class GatewayUnavailable(GatewayError):
    pass


class TimedOut(GatewayError):
    pass


class Unavailable(GatewayError):
    pass


class AuthFailed(GatewayError):
    pass


class EmptyScript(StorydeckError):
    pass


# ---------------------------------------------------------------------------
# export / service

class UnresolvedFact(StorydeckError):
    pass


class UnknownTheme(StorydeckError):
    pass


class UnknownSession(StorydeckError):
    pass


class UnknownFact(StorydeckError):
    pass


class UnknownRelation(StorydeckError):
    pass


class UnknownTarget(StorydeckError):
    pass


class EmptyDeck(StorydeckError):
    pass


class PortInUse(StorydeckError):
    pass
