"""Exception types shared across the package."""
from __future__ import annotations


class SemtowerError(Exception):
    """Base class for all errors raised by semtower."""


class TransportError(SemtowerError):
    """A remote service (embedder, LLM, SPARQL endpoint) could not be reached or answered badly."""

    def __init__(self, endpoint: str, cause: object):
        self.endpoint = endpoint
        self.cause = cause
        super().__init__(f"request to {endpoint} failed: {cause}")


class DimensionMismatchError(SemtowerError, ValueError):
    def __init__(self, expected: int, got: int, what: str = "vector"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} dimension mismatch: expected {expected}, got {got}")


class DuplicateLabelError(SemtowerError, ValueError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"duplicate type label: {label!r}")


class FormatError(SemtowerError, ValueError):
    """A file did not conform to its format. ``line`` is 1-based when known."""

    def __init__(self, path, message: str, line: int | None = None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class SparqlParseError(SemtowerError, ValueError):
    def __init__(self, message: str, fragment: str):
        self.fragment = fragment
        super().__init__(f"{message}: {fragment[:200]!r}")


class ConfigError(SemtowerError, ValueError):
    pass
