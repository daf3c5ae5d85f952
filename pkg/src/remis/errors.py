"""Exception hierarchy.

Every numerical failure that points at a violated modelling assumption derives
from :class:`AssumptionViolation` and carries the tag of the condition it
suggests (``"I1"``, ``"C2"``, ...).  The CLI maps these to exit code 2.
"""


class RemisError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(RemisError, ValueError):
    """Inconsistent dimensions, schemes or other user input."""


class LagOrderTooSmall(ConfigError):
    pass


class InsufficientSample(ConfigError):
    pass


class AssumptionViolation(RemisError):
    """A check failed in a way that signals the input lies outside the
    admissible parameter set."""

    assumption = None

    def __init__(self, message, assumption=None):
        super().__init__(message)
        if assumption is not None:
            self.assumption = assumption

    def __str__(self):
        msg = super().__str__()
        if self.assumption:
            return f"{msg} [suggests violation of {self.assumption}]"
        return msg


# -- params ---------------------------------------------------------------

class RankMismatch(AssumptionViolation):
    assumption = "C1"


class EchelonSingular(AssumptionViolation):
    assumption = "C1"


class InconsistentTelescope(AssumptionViolation):
    assumption = "C1"


class SingularPivot(AssumptionViolation):
    assumption = "C1"


class BudgetExhausted(RemisError):
    pass


class NonDiagonalizable(BudgetExhausted):
    pass


# -- statespace / blocking ------------------------------------------------

class Unstable(AssumptionViolation):
    assumption = "C3"


class UnstableDiffSystem(Unstable):
    pass


class SingularC(RemisError):
    """Internal error: the structural blocking matrix is not invertible."""


# -- realization ----------------------------------------------------------

class RiccatiDivergence(AssumptionViolation):
    assumption = "C3/C4"


class NonPDInnovation(AssumptionViolation):
    assumption = "C4"


class RankDeficient(AssumptionViolation):
    assumption = "I1/I2/I5"


# -- retrieval ------------------------------------------------------------

class RepeatedEigenvalue(AssumptionViolation):
    assumption = "I3/I4"


class ZeroDenominator(AssumptionViolation):
    assumption = "I6"


class NonRealResult(AssumptionViolation):
    assumption = "I4"


class SingularSum(AssumptionViolation):
    assumption = "I5"


class ConsistencyFail(AssumptionViolation):
    assumption = "I3/I4"


class SingularR(AssumptionViolation):
    assumption = "I1"


class StructureResidualTooLarge(AssumptionViolation):
    assumption = "I3/I4"


class ObsRankDeficient(AssumptionViolation):
    assumption = "I2"


class AsymmetryTooLarge(AssumptionViolation):
    assumption = "I2"


class NonPDSigma(AssumptionViolation):
    assumption = "C4"


# -- deterministic --------------------------------------------------------

class C2Violated(AssumptionViolation):
    assumption = "C2"


class SingularSteadyState(AssumptionViolation):
    assumption = "C2"


class CaseMismatch(RemisError):
    pass


class SingularMmu(AssumptionViolation):
    assumption = "C2"
