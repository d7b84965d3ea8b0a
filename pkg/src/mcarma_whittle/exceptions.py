"""Exception hierarchy.

Errors fall in two families.  ``ValidationError`` subclasses signal bad
input (shapes, ranges, parse failures) and map to CLI exit code 1;
everything else deriving from ``NumericalError`` signals a numerical
failure at otherwise valid input and maps to exit code 2.
"""


class MCARMAError(Exception):
    """Base class for all package errors."""


class ValidationError(MCARMAError, ValueError):
    """Invalid user input."""


class InvalidInputError(ValidationError):
    pass


class InvalidParameterError(ValidationError):
    """Parameter vector outside a model's validity domain.

    ``assumption`` names the violated model condition (e.g. ``"A2"``).
    """

    def __init__(self, message, assumption=None):
        super().__init__(message)
        self.assumption = assumption


class RangeError(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class UnsupportedDriverError(ValidationError):
    pass


class UnsupportedDimensionError(ValidationError):
    pass


class BoundaryError(ValidationError):
    pass


class InsufficientSamplesError(ValidationError):
    pass


class NumericalError(MCARMAError):
    """Numerical failure at valid input."""


class ConvergenceError(NumericalError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegeneracyError(NumericalError):
    pass


class InvertibilityError(NumericalError):
    def __init__(self, message, spectral_radius=None):
        super().__init__(message)
        self.spectral_radius = spectral_radius


class SimulationBlowupError(NumericalError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NumericIntegrityError(NumericalError):
    pass


class InfeasibleStartError(NumericalError):
    pass


class IdentifiabilityError(NumericalError):
    """Hessian limit matrix not positive definite.

    Usually means the parametrization is not locally identifiable at the
    evaluation point (some direction leaves the spectral density unchanged).
    """


class StudyFailureError(NumericalError):
    pass
