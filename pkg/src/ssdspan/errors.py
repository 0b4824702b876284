"""Exception hierarchy shared across the package."""


class SsdSpanError(Exception):
    """Base class for all package errors."""


class PanelParseError(SsdSpanError):
    """Raised when a CSV cell or header cannot be parsed; names row/column."""


class PanelValidationError(SsdSpanError):
    """Raised when panel invariants are violated (dates, duplicates, shapes)."""


class WindowRangeError(SsdSpanError):
    """Raised when a requested window does not fit inside the panel."""


class EmptyUniverseError(SsdSpanError):
    """Raised when filtering leaves no investable assets."""


class DegenerateSupportError(SsdSpanError):
    """Raised when the observed return support collapses to a point."""


class ParameterError(SsdSpanError):
    """Raised for invalid configuration values (grid sizes, alpha, ...)."""


class NumericalError(SsdSpanError):
    """Raised when an optimization fails to reach a trustworthy solution."""


class UndefinedMeasureError(SsdSpanError):
    """Raised when a performance measure is undefined for the given series."""


class BracketError(SsdSpanError):
    """Raised when a root-finding bracket does not contain a sign change."""
