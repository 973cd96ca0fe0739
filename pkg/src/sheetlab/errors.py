"""Exception hierarchy shared across the package."""


class SheetlabError(Exception):
    """Base class for all package-specific failures."""


class DomainError(SheetlabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class GridError(SheetlabError, ValueError):
    """A grid violates a structural requirement (non-uniform, too short, ...)."""


class SeriesConvergenceError(SheetlabError, ArithmeticError):
    """A series evaluation could not reach the requested tolerance.

    ``attained_bound`` is the absolute error bound that was achievable.
    """

    def __init__(self, message: str, attained_bound: float):
        super().__init__(message)
        self.attained_bound = attained_bound


class QuadratureError(SheetlabError, ArithmeticError):
    """Numerical integration failed to converge to the requested tolerance."""


class ConfigError(SheetlabError, ValueError):
    """A run configuration is inconsistent or incomplete."""
