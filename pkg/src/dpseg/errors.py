"""Exception types shared across the package."""


class DpsegError(Exception):
    """Base class for all package errors."""


class InvalidInputError(DpsegError, ValueError):
    """Raised when an argument violates an operation's preconditions."""


class InvalidStateError(DpsegError, ValueError):
    """Raised when a label sequence or chain state is malformed."""


class ConfigError(DpsegError, ValueError):
    """Raised for inconsistent chain or scheme configuration."""


class InfeasiblePathError(DpsegError, ValueError):
    """Raised when the constrained-chain filter has zero mass (e.g. T < K*)."""


class DrawFormatError(DpsegError, ValueError):
    """Raised for unreadable, truncated or version-mismatched draw files."""
