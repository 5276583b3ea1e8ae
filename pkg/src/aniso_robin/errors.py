"""Exception types shared across the package."""


class AnisoError(Exception):
    """Base class for all package errors."""


class ConfigError(AnisoError, ValueError):
    """Bad configuration: unknown keys, unreadable files, resolution limits."""


class NormError(AnisoError, ValueError):
    """Invalid norm parameters or a norm evaluated outside its domain."""


class DomainError(AnisoError, ValueError):
    """An operation was called outside its mathematical domain."""


class UnsupportedDomainError(DomainError):
    """The domain family lacks the regularity an operation needs."""


class DiscretizationError(AnisoError, RuntimeError):
    """The raster is too coarse for the requested operation."""


class ParameterError(AnisoError, ValueError):
    """A solver parameter is out of range (e.g. beta <= -1)."""


class CapacityError(AnisoError, ValueError):
    """Problem too large for exhaustive enumeration."""


class BracketError(AnisoError, RuntimeError):
    """Root bracketing failed during shooting."""
