"""Exception hierarchy shared by every liftctl module."""


class LiftctlError(Exception):
    """Base class for all errors raised by liftctl."""


class ConfigError(LiftctlError, ValueError):
    """Invalid construction parameters (bounds, gains, commands, plant maps)."""


class NonFinite(LiftctlError, ValueError):
    """An input or intermediate value is NaN or infinite."""


class DomainViolation(LiftctlError, ValueError):
    """A state is too close to (or beyond) its bound to be lifted."""


class Inadmissible(LiftctlError):
    """A demanded one-step move leaves the admissible domain of a lifting map."""


class SingularG(LiftctlError, ZeroDivisionError):
    """An input gain g1 or g2 vanished, so the affine inverse does not exist."""


class InverseMismatch(LiftctlError, ArithmeticError):
    """Re-evaluating a forward map at a computed inverse missed its target."""


class Exhausted(LiftctlError, RuntimeError):
    """Rejection sampling hit its budget without finding a feasible sample."""


class NoSwitch(LiftctlError):
    """The rho2 schedule never committed to the deadbeat value within the horizon."""
