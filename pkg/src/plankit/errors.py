"""Exception types shared across the toolkit."""


class PlankitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PlankitError, ValueError):
    """An input, configuration, or domain object violates a documented contract."""


class ParseError(PlankitError, ValueError):
    """Text could not be parsed into the expected structure."""


class FixtureError(PlankitError, ValueError):
    """A fixture file is malformed or internally inconsistent."""


class ProtocolError(PlankitError, RuntimeError):
    """A wire-protocol message violates the documented schema."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class ScorerUnavailableError(PlankitError, RuntimeError):
    """A scorer endpoint could not be reached after exhausting retries."""
