"""Exception hierarchy shared by all modules."""


class VolterraError(Exception):
    """Base class for every error raised by this package."""


class DomainError(VolterraError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UsageError(VolterraError, ValueError):
    """Arguments are individually valid but cannot be combined (e.g. mismatched grids)."""


class UnsupportedError(VolterraError):
    """The requested route does not exist for this input (e.g. no sampler)."""


class NumericalError(VolterraError, ArithmeticError):
    """A numerical procedure failed to deliver its contract."""


class NormNotConverged(NumericalError):
    """Power iteration hit its cap; ``estimate`` still holds valid bounds."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate
