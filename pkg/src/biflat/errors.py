"""Exception hierarchy shared by all modules."""


class BiflatError(Exception):
    """Base class for every error raised by the package."""


# numerics
class PoleAtC(BiflatError):
    pass


class NoConvergence(BiflatError):
    pass


class StepFailure(BiflatError):
    pass


class NonFinite(BiflatError):
    pass


class DegenerateLeadingCoefficient(BiflatError):
    pass


# charts and geometry
class ChartError(BiflatError):
    pass


class ChartCollision(ChartError):
    """Two canonical coordinates coincide (up to 1e-8)."""


class OriginSingularity(ChartError):
    """A canonical coordinate vanishes where the dual structure needs 1/u^i."""


class EvaluationFailure(BiflatError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


# n = 2 family
class DegenerateCoupling(BiflatError):
    pass


# n = 3 reduction
class SingularZ(BiflatError):
    pass


class InconsistentIntegrals(BiflatError):
    pass


class InconsistentSystem(BiflatError):
    pass


class BranchFailure(BiflatError):
    pass


# epsilon-system
class DomainError(BiflatError):
    pass


class NormalizationPole(BiflatError):
    pass


class ZeroEpsilon(BiflatError):
    pass


class ZeroDenominator(BiflatError):
    pass


class ConfigError(BiflatError):
    """Invalid run configuration (CLI exit code 2)."""
