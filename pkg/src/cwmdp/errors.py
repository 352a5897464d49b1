"""Exception hierarchy shared by all modules."""


class CWError(Exception):
    """Base class for errors raised by cwmdp."""


class DomainError(CWError, ValueError):
    """An input lies outside the domain where a quantity is defined."""


class UnsupportedOrderError(CWError, ValueError):
    pass


class ConfigurationError(CWError, ValueError):
    """Inadmissible scaling regime or malformed run configuration."""


class RegimeError(CWError, ValueError):
    """The centering point does not have the flatness the regime requires."""


class NumericRangeError(CWError, ArithmeticError):
    pass


class OptimizationError(CWError, RuntimeError):
    """Path optimisation failed; ``best`` holds the best path found."""

    def __init__(self, message, best=None, best_action=None):
        super().__init__(message)
        self.best = best
        self.best_action = best_action
