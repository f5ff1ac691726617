"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class NumericalError(RuntimeError):
    """A solver produced non-finite values or otherwise broke down."""
