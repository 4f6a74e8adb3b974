"""Two-step backstepping in lifted coordinates.

Step one drives ``e1 = psi1(zeta1) - psi1(zeta1d)`` with the virtual target
``z2d = F1_inverse(z1, rho1*e1 + psi1(zeta1d[k+1]))``.  Step two picks

    u = F2_inverse(z1, z2, rho2[k]*e2 + psi2(zeta2d[k+1]))

so that ``e2[k+1] = rho2[k]*e2[k]``.  Forming ``zeta2d[k+1]`` needs the
predicted ``z1[k+1]`` and the command two samples ahead.

The second-step target ``psi2(zeta2d)`` is carried as the normalized value
``t = x2d / x2_bar`` returned by :func:`F1_target`.  During a switching
transient ``|t|`` may exceed 1 (no lifted ``z2d`` exists), yet ``e2`` and
``rho2*e2 + t`` are still finite and the latter is what must stay in (-1, 1).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from ._validation import check_contraction_gain, check_finite, check_positive
from .exceptions import ConfigError, DomainViolation, Inadmissible
from .lifted_dynamics import F1, F1_inverse, F1_target, F2_inverse, LiftedSystem
from .lifting import lift
from .plant import PlantState

__all__ = [
    "CommandSignal",
    "ControlDecision",
    "GainSchedule",
    "TrackingErrors",
    "control",
    "error_e1",
    "error_e2",
    "rho2_switching",
    "tracking_errors",
    "virtual_target_chi2",
    "virtual_target_z2d",
]

RHO2_POLICIES = ("fixed", "switching", "deadbeat")


@dataclass(frozen=True)
class CommandSignal:
    """Desired position ``x1d(k)``: a constant or ``A*sin(omega*k)``."""

    kind: str = "constant"
    value: float = 0.0
    amplitude: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "sinusoid"):
            raise ConfigError(f"command kind must be 'constant' or 'sinusoid', got {self.kind!r}")
        for name in ("value", "amplitude", "omega"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ConfigError(f"command {name} must be finite, got {v!r}")

    @classmethod
    def constant(cls, value: float) -> "CommandSignal":
        return cls("constant", value=float(value))

    @classmethod
    def sinusoid(cls, amplitude: float, omega: float) -> "CommandSignal":
        return cls("sinusoid", amplitude=float(amplitude), omega=float(omega))

    @classmethod
    def parse(cls, text: str) -> "CommandSignal":
        """Parse ``const:0.5`` or ``sin:A=0.5,omega=0.5``."""
        text = text.strip()
        kind, _, rest = text.partition(":")
        try:
            if kind in ("const", "constant"):
                return cls.constant(float(rest))
            if kind in ("sin", "sinusoid"):
                params = {}
                for item in filter(None, re.split(r"\s*,\s*", rest)):
                    key, _, val = item.partition("=")
                    params[key.strip()] = float(val)
                unknown = set(params) - {"A", "omega"}
                if unknown or "A" not in params:
                    raise ValueError(f"unexpected keys {sorted(unknown)}")
                return cls.sinusoid(params["A"], params.get("omega", 0.1))
        except ValueError as exc:
            raise ConfigError(f"bad command spec {text!r}: {exc}") from None
        raise ConfigError(f"bad command spec {text!r}: expected const:<v> or sin:A=<a>,omega=<w>")

    def __str__(self) -> str:
        if self.kind == "constant":
            return f"const:{self.value!r}"
        return f"sin:A={self.amplitude!r},omega={self.omega!r}"

    def __call__(self, k: int) -> float:
        if self.kind == "constant":
            return self.value
        return self.amplitude * math.sin(self.omega * k)

    @property
    def peak(self) -> float:
        return abs(self.value) if self.kind == "constant" else abs(self.amplitude)

    def sup_increment(self) -> float:
        """Supremum over k of ``|x1d(k+1) - x1d(k)|``."""
        if self.kind == "constant":
            return 0.0
        return 2.0 * abs(self.amplitude) * abs(math.sin(0.5 * self.omega))

    def check_bounds(self, x1_bar: float) -> None:
        if not self.peak < x1_bar:
            raise ConfigError(f"command peak {self.peak!r} must be < x1_bar = {x1_bar!r}")

    def frozen_at(self, k: int) -> "CommandSignal":
        """Constant command holding the value at step ``k``."""
        return CommandSignal.constant(self(k))


def rho2_switching(delta_x: float, x2_bar: float) -> float:
    """State-dependent second-step gain for the double integrator.

    Zero when ``|delta_x| < x2_bar``; otherwise ``1 - x2_bar/(2|delta_x|)``,
    which puts the next normalized velocity at +/-1/2.
    """
    x2_bar = check_positive("x2_bar", x2_bar)
    d = abs(delta_x)
    if d < x2_bar:
        return 0.0
    return 1.0 - x2_bar / (2.0 * d)


@dataclass
class GainSchedule:
    """First-step gain rho1 and the policy producing rho2[k].

    The schedule is owned by a single run.  It latches the switching time
    ``switch_step`` the first time rho2 is zero and emits zero afterwards;
    later steps where the raw switching law would have been nonzero are
    appended to ``switch_violations`` instead of being silently ignored.
    """

    rho1: float = 0.0
    policy: str = "switching"
    rho2: float = 0.0
    allow_unproven_rho1: bool = False
    switch_step: int | None = None
    switch_violations: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.rho1 = check_contraction_gain("rho1", self.rho1)
        if self.rho1 != 0.0 and not self.allow_unproven_rho1:
            raise ConfigError(
                "forward invariance is only established for rho1 = 0; "
                "pass allow_unproven_rho1=True to run with rho1 != 0"
            )
        if self.policy not in RHO2_POLICIES:
            raise ConfigError(f"rho2 policy must be one of {RHO2_POLICIES}, got {self.policy!r}")
        self.rho2 = check_contraction_gain("rho2", self.rho2)
        if self.policy == "deadbeat":
            self.rho2 = 0.0

    @classmethod
    def parse(cls, rho1: float, rho2: str, allow_unproven_rho1: bool = False) -> "GainSchedule":
        """Build from ``"switching"``, ``"deadbeat"`` or ``"fixed:<value>"``."""
        text = str(rho2).strip()
        if text in ("switching", "deadbeat"):
            return cls(rho1, text, allow_unproven_rho1=allow_unproven_rho1)
        kind, _, val = text.partition(":")
        if kind == "fixed":
            try:
                value = float(val)
            except ValueError:
                raise ConfigError(f"bad rho2 spec {text!r}") from None
            return cls(rho1, "fixed", value, allow_unproven_rho1=allow_unproven_rho1)
        raise ConfigError(f"bad rho2 spec {text!r}: expected switching, deadbeat or fixed:<v>")

    def spec(self) -> str:
        return f"fixed:{self.rho2!r}" if self.policy == "fixed" else self.policy

    def fresh(self) -> "GainSchedule":
        """Copy with the switching bookkeeping cleared."""
        return GainSchedule(self.rho1, self.policy, self.rho2, self.allow_unproven_rho1)

    def rho2_at(self, k: int, delta_x: float, x2_bar: float) -> float:
        if self.policy == "switching":
            raw = rho2_switching(delta_x, x2_bar)
        else:
            raw = self.rho2
        if self.switch_step is not None:
            if raw != 0.0:
                self.switch_violations.append(k)
            return 0.0
        if raw == 0.0:
            self.switch_step = k
        return raw


@dataclass(frozen=True)
class TrackingErrors:
    """Errors at one step as the controller sees them.

    ``chi2_target`` is ``psi2(zeta2d[k])``, the normalized virtual target.
    """

    e1: float
    e2: float
    chi2_target: float
    z1: float
    z2: float


@dataclass(frozen=True)
class ControlDecision:
    u: float
    e1: float
    e2: float
    z2d: float | None
    rho2_k: float
    predicted_F1: float
    predicted_psi2_target: float
    psi2_d_next: float
    z1: float
    z2: float


def _chi1d(sys: LiftedSystem, x1d: float) -> float:
    """psi1(zeta1d) for a command value, evaluated through the lift."""
    p = lift(x1d, sys.x1_bar, sys.pair1)
    return sys.pair1.psi(p.zeta)


def error_e1(sys: LiftedSystem, z1: float, cmd: CommandSignal, k: int) -> float:
    """``psi1(zeta1[k]) - psi1(zeta1d[k])``, i.e. ``(x1 - x1d)/x1_bar``."""
    return sys.pair1.psi(z1 / sys.x1_bar) - _chi1d(sys, cmd(k))


def virtual_target_chi2(
    sys: LiftedSystem, z1: float, e1: float, cmd: CommandSignal, k: int, rho1: float
) -> float:
    """Normalized velocity target, possibly outside (-1, 1)."""
    return F1_target(sys, z1, rho1 * e1 + _chi1d(sys, cmd(k + 1)))


def virtual_target_z2d(
    sys: LiftedSystem, z1: float, e1: float, cmd: CommandSignal, k: int, rho1: float
) -> float:
    """Lifted virtual target ``z2d[k]``; raises Inadmissible if it does not exist."""
    return F1_inverse(sys, z1, rho1 * e1 + _chi1d(sys, cmd(k + 1)))


def error_e2(sys: LiftedSystem, z2: float, z2d: float) -> float:
    return sys.pair2.psi(z2 / sys.x2_bar) - sys.pair2.psi(z2d / sys.x2_bar)


def tracking_errors(
    sys: LiftedSystem, s: PlantState, cmd: CommandSignal, rho1: float
) -> TrackingErrors:
    """Lift the state and evaluate e1, e2 at step ``s.k``."""
    z1 = lift(s.x1, sys.x1_bar, sys.pair1).z
    z2 = lift(s.x2, sys.x2_bar, sys.pair2).z
    e1 = error_e1(sys, z1, cmd, s.k)
    t = virtual_target_chi2(sys, z1, e1, cmd, s.k, rho1)
    e2 = sys.pair2.psi(z2 / sys.x2_bar) - t
    return TrackingErrors(e1=e1, e2=e2, chi2_target=t, z1=z1, z2=z2)


def control(
    sys: LiftedSystem,
    s: PlantState,
    cmd: CommandSignal,
    gains: GainSchedule,
    freeze_command: bool = False,
) -> ControlDecision:
    """Backstepping control input at state ``s``.

    With ``freeze_command`` the command is held at ``x1d(k)`` over the
    lookahead instead of being evaluated at k+1 and k+2.

    Raises DomainViolation if the state cannot be lifted, and Inadmissible
    if the predicted position or the demanded velocity leaves (-1, 1).
    """
    k = s.k
    if freeze_command:
        cmd = cmd.frozen_at(k)
    rho1 = gains.rho1
    err = tracking_errors(sys, s, cmd, rho1)

    f1_pred = F1(sys, err.z1, err.z2)
    try:
        z1_next = lift(sys.x1_bar * f1_pred, sys.x1_bar, sys.pair1).z
    except DomainViolation:
        raise Inadmissible(
            f"step {k}: predicted |x1[k+1]|/x1_bar = {abs(f1_pred):.17g} leaves the "
            "admissible domain of the first lifting map"
        ) from None
    e1_next = sys.pair1.psi(z1_next / sys.x1_bar) - _chi1d(sys, cmd(k + 1))
    t_next = virtual_target_chi2(sys, z1_next, e1_next, cmd, k + 1, rho1)

    delta_x = s.x2 + s.x1 - cmd(k)
    rho2 = gains.rho2_at(k, delta_x, sys.x2_bar)
    y = rho2 * err.e2 + t_next
    if abs(y) >= sys.pair2.limit:
        raise Inadmissible(
            f"step {k}: demanded |x2[k+1]|/x2_bar = {abs(y):.17g} leaves the "
            "admissible domain of the second lifting map"
        )
    u = F2_inverse(sys, err.z1, err.z2, y)

    t = err.chi2_target
    z2d = sys.x2_bar * sys.pair2.phi(t) if abs(t) < sys.pair2.limit else None
    return ControlDecision(
        u=check_finite("u", u),
        e1=err.e1,
        e2=err.e2,
        z2d=z2d,
        rho2_k=rho2,
        predicted_F1=f1_pred,
        predicted_psi2_target=y,
        psi2_d_next=t_next,
        z1=err.z1,
        z2=err.z2,
    )
