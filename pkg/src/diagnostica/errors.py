"""Exception hierarchy shared by all diagnostica modules.

Every error raised on purpose by this package derives from
:class:`DiagnosticaError`, so callers can catch the package's failures
without swallowing genuine bugs such as ``TypeError``.
"""


class DiagnosticaError(Exception):
    """Base class for all errors raised by diagnostica."""


class FormatError(DiagnosticaError):
    """Malformed input data (ragged CSV rows, empty body, bad JSON)."""


class SchemaError(DiagnosticaError):
    """A declared schema does not match the data it describes."""


class UndefinedQualityError(DiagnosticaError):
    """Quality requested for a pattern with an empty cover."""


class ConfigError(DiagnosticaError):
    """Invalid configuration (bad measure parameters, bad model profile)."""


class CycleError(DiagnosticaError):
    """A graph that must be acyclic contains a cycle."""

    def __init__(self, message: str, cycle: tuple = ()):  # noqa: D107
        super().__init__(message)
        self.cycle = tuple(cycle)


class ValidationError(DiagnosticaError):
    """Domain-rule violation (bad DTC format, missing required attribute)."""


class IntegrityError(DiagnosticaError):
    """Referential-integrity violation inside the knowledge graph."""


class ParseError(DiagnosticaError):
    """A serialized graph or model file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):  # noqa: D107
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateSeriesError(DiagnosticaError):
    """A time series is constant and cannot be z-normalized."""


class ShapeError(DiagnosticaError):
    """Array arguments have incompatible shapes or lengths."""


class ProtocolError(DiagnosticaError):
    """A session operation was issued in a state that does not allow it."""


class NotFittedError(DiagnosticaError):
    """An estimator method that requires a prior fit was called unfitted."""
