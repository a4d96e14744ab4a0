"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (non-PD matrix, collapsed EM, ...)."""
