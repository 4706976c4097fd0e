"""Exception types raised across the package."""


class DearError(Exception):
    """Base class for all package errors."""


class InvalidBandwidthError(DearError):
    """A bandwidth is non-positive or otherwise unusable."""


class OverflowGuardError(DearError):
    """A concentration parameter is large enough to overflow the direct formula."""


class InvalidConfigError(DearError):
    """A kernel or run configuration violates its invariants."""


class SparsityError(DearError):
    """All kernel weights underflowed; the query sits in an empty region."""


class InvalidSampleError(DearError):
    """A sample is degenerate (zero variance, all-equal, too short)."""


class InsufficientDataError(DearError):
    """Not enough observations for the requested fit."""


class InsufficientHistoryError(DearError):
    """Not enough lagged values for the requested forecast."""


class SchemaError(DearError):
    """A CSV file does not match the declared schema."""


class EmptyDatasetError(DearError):
    """No rows survived ingestion or filtering."""


class NumericalError(DearError):
    """A numerical procedure failed beyond its fallbacks."""
