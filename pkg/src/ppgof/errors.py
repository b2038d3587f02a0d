"""Exception hierarchy.

Input problems derive from :class:`InvalidInputError` (CLI exit code 2);
numerical breakdowns derive from :class:`NumericalError` (exit code 3).
"""


class PPGofError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PPGofError, ValueError):
    pass


class DomainError(InvalidInputError):
    """A time or parameter outside the admissible domain."""


class InsufficientDataError(InvalidInputError):
    pass


class InvalidStateError(PPGofError, RuntimeError):
    """Required auxiliary state (e.g. latent shots, intensity cache) is missing."""


class NumericalError(PPGofError, ArithmeticError):
    pass


class SimulationBlowupError(NumericalError):
    pass


class FitFailureError(NumericalError):
    pass


class ExperimentError(NumericalError):
    pass
