"""Exception types shared across the package."""


class StormReachError(Exception):
    """Base class for all package-specific errors."""


class NowcastParseError(StormReachError):
    """A nowcast file could not be parsed; message names line and column."""


class SchemaViolationError(StormReachError):
    """Parsed data violates a structural invariant (ordering, duplicate IDs)."""


class DataError(StormReachError):
    """Inputs are structurally unusable (missing files, bad spacing, bad config)."""
