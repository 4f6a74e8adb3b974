"""One-step maps of the plant written in lifted coordinates.

``F1`` and ``F2`` return the *normalized* next states ``x1[k+1]/x1_bar`` and
``x2[k+1]/x2_bar`` as functions of the lifted state, so the lifted dynamics
read ``z1[k+1] = x1_bar * phi1(F1)`` and ``z2[k+1] = x2_bar * phi2(F2)``.
Both maps are affine in their last argument, which makes the inverses
closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ._validation import check_finite
from .exceptions import Inadmissible, InverseMismatch, NonFinite, SingularG
from .lifting import SigmoidPair, StateBounds, get_pair
from .plant import StrictFeedbackPlant

__all__ = [
    "LiftedSystem",
    "F1",
    "F2",
    "F1_inverse",
    "F1_target",
    "F2_inverse",
    "unlift_state",
]

_INVERSE_TOL = 1e-10


@dataclass(frozen=True)
class LiftedSystem:
    plant: StrictFeedbackPlant
    pair1: SigmoidPair
    pair2: SigmoidPair

    @classmethod
    def from_names(
        cls,
        plant: StrictFeedbackPlant,
        sigmoid1: str = "atanh",
        sigmoid2: str | None = None,
        guard_band: float | None = None,
    ) -> "LiftedSystem":
        return cls(
            plant,
            get_pair(sigmoid1, guard_band),
            get_pair(sigmoid2 or sigmoid1, guard_band),
        )

    @property
    def bounds(self) -> StateBounds:
        return self.plant.bounds

    @property
    def x1_bar(self) -> float:
        return self.plant.bounds.x1_bar

    @property
    def x2_bar(self) -> float:
        return self.plant.bounds.x2_bar


def unlift_state(sys: LiftedSystem, z1: float, z2: float) -> tuple[float, float]:
    """Original coordinates ``(x1_bar*psi1(zeta1), x2_bar*psi2(zeta2))``."""
    return (
        sys.x1_bar * sys.pair1.psi(z1 / sys.x1_bar),
        sys.x2_bar * sys.pair2.psi(z2 / sys.x2_bar),
    )


def _finite(name: str, v: float) -> float:
    if not math.isfinite(v):
        raise NonFinite(f"{name} evaluated to {v!r}")
    return v


def F1(sys: LiftedSystem, z1: float, z2: float) -> float:
    z1 = check_finite("z1", z1)
    z2 = check_finite("z2", z2)
    x1_bar, x2_bar = sys.x1_bar, sys.x2_bar
    x1 = x1_bar * sys.pair1.psi(z1 / x1_bar)
    chi2 = sys.pair2.psi(z2 / x2_bar)
    p = sys.plant
    return _finite("F1", p.f1(x1) / x1_bar + (x2_bar / x1_bar) * p.g1(x1) * chi2)


def F2(sys: LiftedSystem, z1: float, z2: float, u: float) -> float:
    u = check_finite("u", u)
    x1, x2 = unlift_state(sys, check_finite("z1", z1), check_finite("z2", z2))
    p = sys.plant
    x2_bar = sys.x2_bar
    return _finite("F2", p.f2(x1, x2) / x2_bar + p.g2(x1, x2) / x2_bar * u)


def F1_target(sys: LiftedSystem, z1: float, y: float) -> float:
    """Normalized second state ``t`` that makes ``F1(z1, .)`` equal ``y``.

    ``t = (x1_bar*y - f1(x1)) / (x2_bar*g1(x1))``.  No admissibility test is
    applied here: ``t`` may lie outside (-1, 1), in which case no lifted
    ``z2`` realizes it.
    """
    z1 = check_finite("z1", z1)
    y = check_finite("y", y)
    x1 = sys.x1_bar * sys.pair1.psi(z1 / sys.x1_bar)
    g = sys.plant.g1(x1)
    if g == 0.0:
        raise SingularG(f"g1 vanishes at x1={x1:.17g}")
    return _finite("F1 target", (sys.x1_bar * y - sys.plant.f1(x1)) / (sys.x2_bar * g))


def F1_inverse(sys: LiftedSystem, z1: float, y: float) -> float:
    """Return ``z2`` with ``F1(z1, z2) == y``.

    Raises Inadmissible when the required ``|x2|/x2_bar`` reaches
    ``1 - guard_band``.
    """
    t = F1_target(sys, z1, y)
    if abs(t) >= sys.pair2.limit:
        raise Inadmissible(
            f"F1 inverse needs |x2|/x2_bar = {abs(t):.17g} >= {sys.pair2.limit:.17g}"
        )
    z2 = sys.x2_bar * sys.pair2.phi(t)
    achieved = F1(sys, z1, z2)
    if abs(achieved - y) > _INVERSE_TOL * max(1.0, abs(y)):
        raise InverseMismatch(f"F1(z1, F1_inverse(z1, y)) = {achieved!r} != y = {y!r}")
    return z2


def F2_inverse(sys: LiftedSystem, z1: float, z2: float, y: float) -> float:
    """Return ``u`` with ``F2(z1, z2, u) == y``."""
    y = check_finite("y", y)
    x1, x2 = unlift_state(sys, check_finite("z1", z1), check_finite("z2", z2))
    p = sys.plant
    g = p.g2(x1, x2)
    if g == 0.0:
        raise SingularG(f"g2 vanishes at (x1, x2)=({x1:.17g}, {x2:.17g})")
    u = _finite("u", (sys.x2_bar * y - p.f2(x1, x2)) / g)
    achieved = F2(sys, z1, z2, u)
    if abs(achieved - y) > _INVERSE_TOL * max(1.0, abs(y)):
        raise InverseMismatch(f"F2(z1, z2, F2_inverse(z1, z2, y)) = {achieved!r} != y = {y!r}")
    return u
