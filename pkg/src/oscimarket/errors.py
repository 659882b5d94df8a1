"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): validation
problems with inputs or configs, and numerical failures during a run.
"""


class OscimarketError(Exception):
    pass


class ValidationError(OscimarketError, ValueError):
    """Input violates a documented precondition or invariant."""


class NumericalFailure(OscimarketError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class ConstraintViolation(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class InterlacingViolation(ValidationError):
    pass


class FrequencyMismatch(ValidationError):
    pass


class UnsupportedPotential(ValidationError):
    pass


class MissingFairValue(ValidationError):
    pass


class SeriesTooShort(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class NonMonotonicDates(ParseError):
    pass


class NonPositivePrice(ParseError):
    pass


class EigenNoConvergence(NumericalFailure):
    pass


class NonReproducible(NumericalFailure):
    pass


class StepRejectionExhausted(NumericalFailure):
    pass


class FiberSamplerFailure(NumericalFailure):
    pass


class InsufficientPeaks(OscimarketError):
    pass
