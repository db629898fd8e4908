"""Exception types raised across the package."""


class RotatorError(ValueError):
    """Base class for all rotator_lab errors."""


class DomainError(RotatorError):
    """Argument outside the admissible domain of a profile or state."""


class SingularDerivative(RotatorError):
    """f'(Q) vanishes where a formula divides by it."""


class StepFailure(RotatorError):
    pass


class DegenerateRotation(RotatorError):
    """Q = 0 where the momentum formulas need a rotating null direction."""


class SingularBlock(RotatorError):
    pass


class DegenerateHessian(RotatorError):
    """Velocity Hessian is singular, accelerations cannot be solved for."""

    def __init__(self, message, ratio=None, t=None):
        super().__init__(message)
        self.ratio = ratio
        self.t = t


class InvariantViolation(RotatorError):
    pass


class ProjectorSingular(RotatorError):
    pass


class PhaseStall(RotatorError):
    """Phase derivative is not positive, so the null direction is undefined."""


class JetMismatch(RotatorError):
    pass
