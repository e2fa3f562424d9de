"""Exception types shared across the package."""


class ArgLinkerError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ArgLinkerError):
    """Input data violates a documented invariant."""


class StructureError(ValidationError):
    """A head vector is not a valid tree (e.g. contains a cycle)."""


class FormatError(ArgLinkerError):
    """A file does not match its declared on-disk format."""


class ConfigError(ArgLinkerError):
    """Inconsistent or unusable configuration."""


class NumericError(ArgLinkerError):
    """A computation produced non-finite values."""
