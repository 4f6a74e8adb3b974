"""Sigmoid pairs and the x -> chi -> z -> zeta coordinate pipeline.

A constrained scalar ``x`` with ``|x| < x_bar`` is normalized to
``chi = x / x_bar`` in (-1, 1), lifted to ``z = x_bar * phi(chi)`` on the
whole real line, and rescaled to ``zeta = z / x_bar``.  The way back is
``x = x_bar * psi(zeta)`` where ``psi`` is a strictly increasing odd sigmoid
and ``phi`` its inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

from ._validation import check_finite, check_positive
from .exceptions import ConfigError, DomainViolation

__all__ = [
    "DEFAULT_GUARD_BAND",
    "PAIR_NAMES",
    "LiftedPoint",
    "SigmoidPair",
    "StateBounds",
    "catalog",
    "erfinv",
    "get_pair",
    "lift",
    "unlift",
]

DEFAULT_GUARD_BAND = 1e-9

# Largest double strictly below 1.  Every psi is clipped to it so that the
# open range (-1, 1) survives rounding (tanh(20.0) == 1.0 in binary64).
_BELOW_ONE = math.nextafter(1.0, 0.0)

_HALF_PI = 0.5 * math.pi
_TWO_OVER_PI = 2.0 / math.pi
_SQRT_PI = math.sqrt(math.pi)
_ERFINV_MAX_NEWTON = 50


def _open_unit(v: float) -> float:
    if v >= 1.0:
        return _BELOW_ONE
    if v <= -1.0:
        return -_BELOW_ONE
    return v


@dataclass(frozen=True)
class SigmoidPair:
    """A strictly increasing odd sigmoid ``psi`` and its inverse ``phi``.

    ``guard_band`` is the width of the strip next to +/-1 in which
    :func:`lift` refuses to evaluate ``phi``.
    """

    name: str
    psi: Callable[[float], float]
    phi: Callable[[float], float]
    guard_band: float = DEFAULT_GUARD_BAND

    def __post_init__(self):
        if not (0.0 < self.guard_band < 0.1):
            raise ConfigError(f"guard_band must lie in (0, 0.1), got {self.guard_band!r}")

    def with_guard_band(self, guard_band: float) -> "SigmoidPair":
        return replace(self, guard_band=float(guard_band))

    @property
    def limit(self) -> float:
        """Largest |chi| accepted by :func:`lift`."""
        return 1.0 - self.guard_band


@dataclass(frozen=True)
class StateBounds:
    """Bounds of the safe box ``|x1| < x1_bar, |x2| < x2_bar``."""

    x1_bar: float
    x2_bar: float

    def __post_init__(self):
        object.__setattr__(self, "x1_bar", check_positive("x1_bar", self.x1_bar))
        object.__setattr__(self, "x2_bar", check_positive("x2_bar", self.x2_bar))


@dataclass(frozen=True)
class LiftedPoint:
    """One scalar state seen in all four coordinates."""

    x: float
    chi: float
    z: float
    zeta: float


# -- inverse error function -------------------------------------------------

def erfinv(y: float) -> float:
    """Inverse of :func:`math.erf` on (-1, 1).

    Starts from Giles' single-precision polynomial approximation in
    ``w = -log(1 - y^2)`` and polishes it with Newton steps against
    ``math.erf`` (``math.erfc`` for ``|y| > 0.5``) until the correction is
    below an ulp.
    """
    if not -1.0 < y < 1.0:
        if y == 1.0:
            return math.inf
        if y == -1.0:
            return -math.inf
        raise DomainViolation(f"erfinv argument must lie in [-1, 1], got {y!r}")
    if y == 0.0:
        return 0.0
    w = -math.log((1.0 - y) * (1.0 + y))
    if w < 5.0:
        w -= 2.5
        p = 2.81022636e-08
        p = 3.43273939e-07 + p * w
        p = -3.5233877e-06 + p * w
        p = -4.39150654e-06 + p * w
        p = 0.00021858087 + p * w
        p = -0.00125372503 + p * w
        p = -0.00417768164 + p * w
        p = 0.246640727 + p * w
        p = 1.50140941 + p * w
    else:
        w = math.sqrt(w) - 3.0
        p = -0.000200214257
        p = 0.000100950558 + p * w
        p = 0.00134934322 + p * w
        p = -0.00367342844 + p * w
        p = 0.00573950773 + p * w
        p = -0.0076224613 + p * w
        p = 0.00943887047 + p * w
        p = 1.00167406 + p * w
        p = 2.83297682 + p * w
    x = p * y
    # The polynomial is good to ~1e-7 for 1 - |y| > 1e-7 and one Newton step
    # finishes the job; further out it degrades and a few more steps are
    # needed.  In the tails erf(x) - y cancels, so the residual goes through
    # erfc there (1 - |y| is exact for |y| > 0.5).
    for _ in range(_ERFINV_MAX_NEWTON):
        if abs(y) > 0.5:
            sign = 1.0 if y > 0.0 else -1.0
            r = sign * (math.erfc(abs(x)) - (1.0 - abs(y)))
        else:
            r = y - math.erf(x)
        dx = r / (2.0 / _SQRT_PI * math.exp(-x * x))
        x += dx
        if abs(dx) <= 4e-16 * abs(x):
            break
    return x


# -- catalog ----------------------------------------------------------------

def _tan_phi(x):
    return math.tan(_HALF_PI * x)


def _tan_psi(z):
    return _open_unit(_TWO_OVER_PI * math.atan(z))


def _atanh_phi(x):
    return math.atanh(x)


def _atanh_psi(z):
    return _open_unit(math.tanh(z))


def _rational_phi(x):
    return x / (1.0 - abs(x))


def _rational_psi(z):
    return _open_unit(z / (1.0 + abs(z)))


def _algebraic_phi(x):
    return x / math.sqrt((1.0 - x) * (1.0 + x))


def _algebraic_psi(z):
    if abs(z) > 1e150:
        return math.copysign(_BELOW_ONE, z)
    return _open_unit(z / math.sqrt(1.0 + z * z))


def _erf_phi(x):
    return 2.0 / _SQRT_PI * erfinv(x)


def _erf_psi(z):
    return _open_unit(math.erf(0.5 * _SQRT_PI * z))


def _gd_phi(x):
    return _TWO_OVER_PI * math.asinh(math.tan(_HALF_PI * x))


def _gd_psi(z):
    a = _HALF_PI * z
    if abs(a) > 700.0:  # sinh overflows; atan(+/-inf) is the limit anyway
        return math.copysign(_BELOW_ONE, z)
    return _open_unit(_TWO_OVER_PI * math.atan(math.sinh(a)))


_CATALOG = {
    "tan": SigmoidPair("tan", _tan_psi, _tan_phi),
    "atanh": SigmoidPair("atanh", _atanh_psi, _atanh_phi),
    "rational": SigmoidPair("rational", _rational_psi, _rational_phi),
    "algebraic": SigmoidPair("algebraic", _algebraic_psi, _algebraic_phi),
    "erf": SigmoidPair("erf", _erf_psi, _erf_phi),
    "gudermannian": SigmoidPair("gudermannian", _gd_psi, _gd_phi),
}

PAIR_NAMES = tuple(_CATALOG)


def catalog() -> list[SigmoidPair]:
    """The six built-in sigmoid pairs, in a fixed order."""
    return list(_CATALOG.values())


def get_pair(name: str, guard_band: float | None = None) -> SigmoidPair:
    try:
        pair = _CATALOG[name]
    except KeyError:
        raise ConfigError(
            f"unknown sigmoid {name!r}; expected one of {', '.join(PAIR_NAMES)}"
        ) from None
    if guard_band is not None and guard_band != pair.guard_band:
        pair = pair.with_guard_band(guard_band)
    return pair


# -- pipeline ---------------------------------------------------------------

def lift(x: float, x_bar: float, pair: SigmoidPair) -> LiftedPoint:
    """Map a constrained coordinate to its lifted representation.

    Raises DomainViolation when ``|x| >= x_bar * (1 - guard_band)``; the
    state is never clamped back inside.
    """
    x = check_finite("x", x)
    x_bar = check_positive("x_bar", x_bar)
    chi = x / x_bar
    if abs(chi) >= pair.limit:
        raise DomainViolation(
            f"|x|/x_bar = {abs(chi):.17g} is outside the liftable interior "
            f"(limit {pair.limit:.17g})"
        )
    z = x_bar * pair.phi(chi)
    return LiftedPoint(x=x, chi=chi, z=z, zeta=z / x_bar)


def unlift(z: float, x_bar: float, pair: SigmoidPair) -> LiftedPoint:
    """Map a lifted coordinate back; the result always satisfies ``|x| < x_bar``."""
    z = check_finite("z", z)
    x_bar = check_positive("x_bar", x_bar)
    zeta = z / x_bar
    chi = pair.psi(zeta)
    x = x_bar * chi
    if abs(x) >= x_bar:
        x = math.copysign(math.nextafter(x_bar, 0.0), x)
    return LiftedPoint(x=x, chi=chi, z=z, zeta=zeta)
