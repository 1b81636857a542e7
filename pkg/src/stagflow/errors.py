"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A requested setup is outside what the solver supports."""


class ConvergenceError(RuntimeError):
    """An iterative solve exhausted its iteration budget."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NumericalError(RuntimeError):
    """A numerical failure (non-finite values, singular factorization)."""
