"""Exception types shared across the package."""


class OffloadSimError(Exception):
    """Base class for all package errors."""


class ConfigError(OffloadSimError):
    """Bad or incomplete configuration input."""


class InfeasibleError(OffloadSimError):
    """The requested workload cannot be completed by the deadline.

    ``deficit`` carries the capacity gap in bits when it is known.
    """

    def __init__(self, message, deficit=None):
        super().__init__(message)
        self.deficit = deficit


class NumericError(OffloadSimError):
    """An iterative solver failed to converge."""
