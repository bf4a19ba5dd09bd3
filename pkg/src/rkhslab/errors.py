"""Exception types shared across the package."""


class RkhsLabError(Exception):
    """Base class for all package errors."""


class DomainError(RkhsLabError):
    """A point lies outside the reference domain."""


class TruncationError(RkhsLabError):
    """A series evaluation cannot meet the requested truncation tolerance."""


class DegenerateDensityError(RkhsLabError):
    """A sampling density was requested with inconsistent mass assignments."""


class RankDeficientError(RkhsLabError):
    """The design matrix is numerically rank deficient; trial must be flagged."""


class ConfigError(RkhsLabError):
    """An experiment configuration failed validation."""
