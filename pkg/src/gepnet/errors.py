"""Exception hierarchy shared across the package."""


class GepnetError(Exception):
    """Base class for all package errors."""


class DomainError(GepnetError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class ModelError(GepnetError, ValueError):
    """A network description violates a modelling assumption."""


class NumericalError(GepnetError, ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


class ConvergenceError(NumericalError):
    """A fixed-point or Newton iteration did not converge."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConfigError(GepnetError, ValueError):
    """Invalid run configuration (CLI or JSON input)."""


class ResourceCapError(GepnetError, RuntimeError):
    """A configured resource cap (memory or problem size) would be exceeded."""


class NonOddActivationWarning(UserWarning):
    """Raised when a zero-mean but non-odd activation enters the coefficient recursion.

    The limiting formulas are derived for activations with vanishing Gaussian
    mean at every operating variance; odd activations satisfy this for free,
    non-odd ones (shifted ReLU, custom tables) only at specific variances.
    """
