"""Exception hierarchy shared by all modules.

The CLI maps each family onto an exit code: configuration problems exit
with 2, numerical failures with 3, missing inputs with 4.
"""


class FssError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(FssError, ValueError):
    """An argument is outside its documented domain."""


class ConfigError(FssError):
    """A run configuration is invalid."""


class MissingInputError(FssError):
    """A required input file is absent and cannot be recomputed."""


class NumericalError(FssError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy result."""


class DecompositionError(NumericalError):
    """A matrix factorization failed (e.g. overlap not positive definite)."""


class AccuracyError(NumericalError):
    """Two independent evaluations disagree beyond tolerance."""


class DomainError(NumericalError):
    """Input values fall outside the mathematical domain of a formula."""


class NoBoundStateError(DomainError):
    """The requested quantity needs a bound state that does not exist."""


class NoCrossingError(NumericalError):
    """Two curves never change relative sign on their shared grid."""


class WindowError(NumericalError):
    """A fit window holds too few valid points."""
