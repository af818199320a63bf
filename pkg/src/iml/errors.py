"""Exception hierarchy.

Validation problems (bad shapes, violated invariants, impossible requests)
derive from :class:`ValidationError`; failures of the numerics derive from
:class:`NumericalError`.  The CLI maps the two families to exit codes 2 and 3.
"""


class IMLError(Exception):
    """Base class for all package errors."""


class ValidationError(IMLError, ValueError):
    pass


class NumericalError(IMLError, ArithmeticError):
    pass


# core / parabolic
class NonIntegralDegree(ValidationError):
    pass


class SpectrumMismatch(ValidationError):
    pass


class InconsistentCandidate(ValidationError):
    pass


class RankBudgetExceeded(IMLError):
    pass


class SearchBudgetExceeded(IMLError):
    pass


# transforms
class FlagDegenerate(NumericalError):
    pass


class SingularGauge(ValidationError):
    pass


class NonTermination(NumericalError):
    def __init__(self, msg, log=()):
        super().__init__(msg)
        self.log = list(log)


# monodromy
class GeometryTooTight(ValidationError):
    pass


class StepUnderflow(NumericalError):
    pass


# schlesinger
class ConfigurationCollision(ValidationError):
    pass


class ChartExit(NumericalError):
    def __init__(self, msg, s=None, norm=None):
        super().__init__(msg)
        self.s = s
        self.norm = norm


class OrderingCutCrossed(ValidationError):
    pass
