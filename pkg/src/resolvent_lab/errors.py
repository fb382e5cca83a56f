"""Exception hierarchy shared by every module of the package."""


class LabError(Exception):
    """Base class for all errors raised by ``resolvent_lab``."""


class NotHermitian(LabError):
    pass


class NoConvergence(LabError):
    def __init__(self, msg, iterations=None):
        super().__init__(msg)
        self.iterations = iterations


class Singular(LabError):
    def __init__(self, msg, rank=None):
        super().__init__(msg)
        self.rank = rank


class DomainError(LabError, ValueError):
    """An argument lies outside the region where the formula is defined."""


class QuadratureFailure(LabError):
    def __init__(self, msg, error_estimate=None):
        super().__init__(msg)
        self.error_estimate = error_estimate


class DecayTooSlow(QuadratureFailure):
    pass


class NotAccretive(LabError):
    pass


class NotSectorial(LabError):
    pass


class RealPartNotPD(LabError):
    pass


class FitFailure(LabError):
    pass


class NotOrthonormal(LabError):
    pass


class EnclosureFailure(LabError):
    pass


class NotDiagonalizable(LabError):
    pass


class SectorViolation(LabError):
    pass


class BranchCutCrossing(LabError):
    pass


class QuadratureNotConverged(LabError):
    pass


class ConfigError(LabError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, msg, field=None):
        super().__init__(msg)
        self.field = field


class ParseError(LabError, ValueError):
    pass


class SchattenGateWarning(UserWarning):
    """Series exponent is at or beyond the Schatten applicability boundary."""
