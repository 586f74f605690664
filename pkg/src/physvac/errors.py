"""Exception types raised across the package."""


class PhysvacError(Exception):
    """Base class for all errors raised by physvac."""


class QuadratureDegreeInsufficient(PhysvacError):
    pass


class InsufficientSmoothness(PhysvacError):
    pass


class NonpositiveWeight(PhysvacError):
    pass


class NotInH10(PhysvacError):
    """A field that must vanish at both endpoints does not."""


class VacuumConditionViolated(PhysvacError):
    """The density does not satisfy the physical vacuum conditions."""

    def __init__(self, message, node=None, inequality=None):
        super().__init__(message)
        self.node = node
        self.inequality = inequality


class EtaRangeViolation(PhysvacError):
    """The flow gradient left the admissible window [1/2, 3/2]."""

    def __init__(self, message, t=None, x=None, value=None):
        super().__init__(message)
        self.t = t
        self.x = x
        self.value = value


class DirichletViolation(PhysvacError):
    pass


class NoConvergence(PhysvacError):
    pass


class SolverFailure(PhysvacError):
    pass


class GammaOutOfRange(PhysvacError):
    pass


class StackDepthInsufficient(PhysvacError):
    pass


class FlowCollapse(PhysvacError):
    """The affine oracle's stretching factor h(t) reached zero."""


class ConfigInvalid(PhysvacError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
