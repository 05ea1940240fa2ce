"""Exception hierarchy."""


class LevyLabError(Exception):
    """Base error for the laboratory."""


class ConfigError(LevyLabError):
    """Invalid or unreadable experiment configuration."""


class DomainError(LevyLabError, ValueError):
    """Precondition violated by an argument."""


class QuadratureError(LevyLabError):
    """Quadrature did not reach the requested agreement."""


class NonFiniteError(LevyLabError, ArithmeticError):
    """An estimator produced NaN or infinity."""

    def __init__(self, message: str, replicate_index: int | None = None):
        super().__init__(message)
        self.replicate_index = replicate_index

    def __reduce__(self):
        return type(self), (self.args[0], self.replicate_index)


class VarianceBudgetError(LevyLabError):
    """A Monte Carlo stage exceeded its standard error budget."""


class EnumerationLimitError(LevyLabError):
    """Brute-force enumeration exceeds the configured bound."""


class BoundViolationError(LevyLabError, AssertionError):
    """A bound that must hold pathwise was violated."""
