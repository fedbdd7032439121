"""Exception hierarchy.

Everything derives from :class:`RicaError` so callers can catch the whole
family; the concrete classes also subclass the closest builtin so generic
``ValueError``/``ArithmeticError`` handlers keep working.
"""


class RicaError(Exception):
    pass


class DomainError(RicaError, ValueError):
    """A point lies outside the chart domain (or an argument outside its domain)."""


class ParameterError(RicaError, ValueError):
    pass


class LinAlgError(RicaError, ArithmeticError):
    """Singular or non-positive-definite matrix where SPD was required."""


class RadiusError(RicaError, ValueError):
    """Target point is outside the injectivity radius of the base point."""


class IntegrationError(RicaError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConvergenceError(RicaError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FrameError(RicaError, ValueError):
    """Frame fails the g-orthogonality check, or a random draw was degenerate."""


class PoleError(RicaError, ArithmeticError):
    """Mobius layer evaluated too close to its inversion centre."""


class RankError(RicaError, ValueError):
    pass


class SampleSizeError(RicaError, ValueError):
    pass


class TrainingError(RicaError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(RicaError, ValueError):
    pass


class EvaluationError(RicaError, ArithmeticError):
    """A density or derived quantity evaluated to a non-finite value."""
