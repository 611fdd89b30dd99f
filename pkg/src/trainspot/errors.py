"""Exception types shared across the package."""


class TrainspotError(Exception):
    """Base class for all package errors."""


class ConfigError(TrainspotError):
    """A configuration value violates a parameter invariant."""


class DataError(TrainspotError):
    """Input data is unusable (bad header, unsorted stream, oversized problem)."""
