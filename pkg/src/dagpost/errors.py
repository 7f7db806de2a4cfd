"""Exception types shared across the package."""


class DagpostError(Exception):
    """Base class for all package errors."""


class InvalidInputError(DagpostError, ValueError):
    """Malformed matrix, cyclic support, mismatched dimensions, bad config."""


class CapacityError(DagpostError):
    """A routine that needs exhaustive enumeration was asked to go past its cap."""

    def __init__(self, what, value, cap):
        self.value = value
        self.cap = cap
        super().__init__(f"{what}={value} exceeds the enumeration cap {cap}")


class NumericalError(DagpostError, ArithmeticError):
    """Factorization failure or a non-finite value where a finite one is required."""

    def __init__(self, message, node=None):
        self.node = node
        if node is not None:
            message = f"{message} (node {node})"
        super().__init__(message)


class DomainError(DagpostError, ValueError):
    """A quantity was requested outside the regime where it is defined."""


class UndefinedRateError(DagpostError, ZeroDivisionError):
    """An error rate has an empty denominator."""


class CalibrationError(DagpostError):
    """No threshold satisfies the requested false-positive tolerance."""
