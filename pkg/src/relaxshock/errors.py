"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (the class name) and an
optional ``witness`` payload that the CLI serializes into its JSON error
object.
"""


class RelaxShockError(Exception):
    """Base class for all library errors."""

    def __init__(self, message="", witness=None):
        super().__init__(message)
        self.witness = witness

    @property
    def code(self):
        return type(self).__name__

    def to_json(self):
        out = {"error": self.code, "message": str(self)}
        if self.witness is not None:
            out["witness"] = _jsonable(self.witness)
        return out


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


# numerics
class SingularMatrix(RelaxShockError):
    pass


class NoConvergence(RelaxShockError):
    pass


class GridTooSmall(RelaxShockError):
    pass


class NonFiniteState(RelaxShockError):
    pass


# model
class SubcharacteristicViolation(RelaxShockError):
    pass


class EquilibriumBranchUndefined(RelaxShockError):
    pass


class NewtonDivergence(RelaxShockError):
    pass


class NotGenuinelyNonlinear(RelaxShockError):
    pass


# structure
class SymmetrizerMissing(RelaxShockError):
    pass


class NoPositiveMargin(RelaxShockError):
    pass


class RankDropInconsistent(RelaxShockError):
    pass


class EigenvalueNotSimple(RelaxShockError):
    pass


class EigenvalueInStrip(RelaxShockError):
    pass


class CountMismatch(RelaxShockError):
    pass


# chapman_enskog
class SingularRelaxationBlock(RelaxShockError):
    pass


class ShootingDivergence(RelaxShockError):
    pass


class WrongLaxCount(RelaxShockError):
    pass


# spaces
class WeightOverflow(RelaxShockError):
    pass


class TailBelowFloor(RelaxShockError):
    pass


# linearized
class SingularBorderedSystem(RelaxShockError):
    pass


class BorderResidualTooLarge(RelaxShockError):
    pass


class A11StarSingular(RelaxShockError):
    pass


class SlowEigenvalueNotSimple(RelaxShockError):
    pass


class SpectralGapViolation(RelaxShockError):
    pass


class NoViscosityConvergence(RelaxShockError):
    pass


# solver
class LeftNeighborhood(RelaxShockError):
    pass


class NoContraction(RelaxShockError):
    pass


class MaxIterExceeded(RelaxShockError):
    pass


class LeftBall(RelaxShockError):
    pass


# stability
class UnstableEigenvalue(RelaxShockError):
    pass


class TranslationModeMissing(RelaxShockError):
    pass


# cli
class ConfigInvalid(RelaxShockError):
    pass
