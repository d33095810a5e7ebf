"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` for bad inputs
(CLI exit code 2) and :class:`NumericalError` for failures inside an
otherwise valid computation (CLI exit code 3).
"""


class ExcikitError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(ExcikitError, ValueError):
    pass


class NumericalError(ExcikitError, ArithmeticError):
    pass


# configuration / domain
class NonPositiveAtomCount(ValidationError):
    pass


class EndDetuningOnWrongTopology(ValidationError):
    pass


class NonFiniteParameter(ValidationError):
    pass


class DetuningMismatch(ValidationError):
    """Ensemble detuning and photonic-crystal kernel detuning disagree."""


class ChainTooShort(ValidationError):
    pass


class UnsupportedVariant(ValidationError):
    pass


class UnsupportedConfiguration(ValidationError):
    """Topology/reservoir combination not handled by the requested path."""


class NotRepresentable(ValidationError):
    pass


class KernelNotRepresentable(ValidationError):
    pass


class PoleAtNonPositiveInteger(ValidationError):
    pass


class BranchPointAtZero(ValidationError):
    pass


class BranchPoint(ValidationError):
    pass


class SingularAtZero(ValidationError):
    pass


class ContourTooClose(ValidationError):
    pass


# numerical
class NonConvergence(NumericalError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class QuadratureFailure(NumericalError):
    pass


class DivergentLimit(NumericalError):
    pass


class LimitUndefined(NumericalError):
    pass


class DegenerateRoots(NumericalError):
    pass


class BackSubstitutionFailure(NumericalError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class NonDecaying(NumericalError):
    pass


class InsufficientModes(NumericalError):
    def __init__(self, message, error=None):
        super().__init__(message)
        self.error = error


class StepSizeUnderflow(NumericalError):
    pass


class SaturationWarning(RuntimeWarning):
    """A special-function value left the representable double range."""
