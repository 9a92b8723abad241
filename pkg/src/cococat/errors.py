"""Exception hierarchy shared by the pricing engine."""


class CoCoCatError(Exception):
    """Base class for all errors raised by the package."""


class ParameterError(CoCoCatError, ValueError):
    """A model or contract parameter lies outside its admissible domain."""


class NumericalToleranceError(CoCoCatError, ArithmeticError):
    """A numerical routine failed to reach its requested accuracy.

    Attributes:
        achieved: Best error estimate reached before giving up.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SingularParameterError(ParameterError):
    """A derived parameter set is singular (e.g. a vanishing mean-reversion speed)."""


class FitError(CoCoCatError, ValueError):
    """A statistical fit is degenerate or cannot be carried out."""


class ConfigError(CoCoCatError, ValueError):
    """A run configuration failed schema validation."""


class DataError(CoCoCatError, ValueError):
    """An input data file is malformed or incomplete."""
