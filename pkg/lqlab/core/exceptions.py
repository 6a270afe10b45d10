"""
Exception hierarchy for laboratory operations
"""


class LabError(Exception):
    """Base exception for laboratory errors."""

    pass


class InvalidArgumentError(LabError, ValueError):
    """Exception raised when an argument violates an operation precondition."""

    pass


class UnsupportedOperationError(LabError):
    """Exception raised when an operation is not defined for the given input."""

    pass


class InvalidQueryError(LabError):
    """Exception raised when a certification query describes an empty class."""

    pass


class NetConstructionError(LabError):
    """Exception raised when an epsilon-net cannot be built."""

    pass


class ConfigError(LabError):
    """Exception raised for malformed run configurations."""

    pass
