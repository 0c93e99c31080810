"""
Exception hierarchy for fptlie.

Every library failure carries a human-readable detail and the CLI exit code
it maps to:
- ValidationFailure (exit 2): bad inputs, parameters outside a formula's range
- NumericalFailure (exit 3): poles, blow-ups, root finding and sampling failures
"""


class FptError(Exception):
    """Base error with an exit code and a detail message."""
    exit_code = 3

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ValidationFailure(FptError):
    exit_code = 2


class NumericalFailure(FptError):
    exit_code = 3


class DomainError(ValidationFailure):
    """Argument outside the function or process domain."""


class FamilyMismatchError(ValidationFailure):
    """Operation called with a DriftSpec of the wrong family."""


class ParameterRangeError(ValidationFailure):
    """Parameters outside the validity window of a map or formula."""


class SymmetryIndexError(ValidationFailure):
    """Symmetry index not available for the family."""


class UnknownTargetError(ValidationFailure):
    """Unknown builtin process or reproduce target."""


class ConfigError(ValidationFailure):
    """Malformed configuration file or CLI value."""


class PoleError(NumericalFailure):
    """Function evaluated at a pole."""


class HorizonError(NumericalFailure):
    """Map evaluated past its validity horizon."""


class RootFindingError(NumericalFailure):
    pass


class QuadratureError(NumericalFailure):
    pass


class NegativeDensityError(NumericalFailure):
    """Transfer produced a negative density (invalid map or formula)."""


class InsufficientSamplesError(NumericalFailure):
    pass


class ProbeFailure(NumericalFailure):
    """Probe solution does not solve its source equation."""


class ConvergenceError(NumericalFailure):
    """Series did not reach its tolerance within the term budget."""


class SpecialOverflowError(NumericalFailure):
    """Special-function value outside the float range; the log-scaled variant is required."""