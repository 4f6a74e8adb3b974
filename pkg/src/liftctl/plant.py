"""Scalar strict-feedback plants.

    x1[k+1] = f1(x1[k]) + g1(x1[k]) * x2[k]
    x2[k+1] = f2(x1[k], x2[k]) + g2(x1[k], x2[k]) * u[k]
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._validation import check_finite
from .exceptions import ConfigError, NonFinite
from .lifting import StateBounds

__all__ = [
    "PLANTS",
    "PlantState",
    "StrictFeedbackPlant",
    "double_integrator",
    "in_safe_set",
    "make_plant",
    "step",
]

_GRID_POINTS = 101


@dataclass(frozen=True)
class StrictFeedbackPlant:
    """The maps f1, g1, f2, g2 plus the bounds of the safe set.

    Construction samples g1 and g2 on a 101 x 101 grid strictly inside the
    safe box and rejects the plant if either gain vanishes there.
    """

    f1: Callable[[float], float]
    g1: Callable[[float], float]
    f2: Callable[[float, float], float]
    g2: Callable[[float, float], float]
    bounds: StateBounds
    name: str = "custom"

    def __post_init__(self):
        if not isinstance(self.bounds, StateBounds):
            raise ConfigError("bounds must be a StateBounds instance")
        # open box: drop the two boundary nodes of a 103-point linspace
        unit = np.linspace(-1.0, 1.0, _GRID_POINTS + 2)[1:-1]
        x1s = unit * self.bounds.x1_bar
        x2s = unit * self.bounds.x2_bar
        for x1 in x1s:
            if self.g1(float(x1)) == 0.0:
                raise ConfigError(f"{self.name}: g1 vanishes at x1={x1:.17g}")
            for x2 in x2s:
                if self.g2(float(x1), float(x2)) == 0.0:
                    raise ConfigError(
                        f"{self.name}: g2 vanishes at (x1, x2)=({x1:.17g}, {x2:.17g})"
                    )


@dataclass(frozen=True)
class PlantState:
    x1: float
    x2: float
    k: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.x1) and math.isfinite(self.x2)):
            raise NonFinite(f"state components must be finite, got ({self.x1!r}, {self.x2!r})")
        if self.k < 0:
            raise ConfigError(f"step index must be nonnegative, got {self.k}")


def step(plant: StrictFeedbackPlant, s: PlantState, u: float) -> PlantState:
    """Advance the open-loop plant by one sample. No constraint is enforced."""
    u = check_finite("u", u)
    x1, x2 = s.x1, s.x2
    x1_next = plant.f1(x1) + plant.g1(x1) * x2
    x2_next = plant.f2(x1, x2) + plant.g2(x1, x2) * u
    if not (math.isfinite(x1_next) and math.isfinite(x2_next)):
        raise NonFinite(f"plant step overflowed from ({x1!r}, {x2!r}) with u={u!r}")
    return PlantState(x1_next, x2_next, s.k + 1)


def in_safe_set(plant: StrictFeedbackPlant, s: PlantState) -> bool:
    return abs(s.x1) < plant.bounds.x1_bar and abs(s.x2) < plant.bounds.x2_bar


def _di_f1(x1):
    return x1


def _di_g1(x1):
    return 1.0


def _di_f2(x1, x2):
    return x2


def _di_g2(x1, x2):
    return 1.0


def double_integrator(x1_bar: float, x2_bar: float) -> StrictFeedbackPlant:
    """x1[k+1] = x1[k] + x2[k],  x2[k+1] = x2[k] + u[k]."""
    return StrictFeedbackPlant(
        f1=_di_f1,
        g1=_di_g1,
        f2=_di_f2,
        g2=_di_g2,
        bounds=StateBounds(x1_bar, x2_bar),
        name="double-integrator",
    )


PLANTS: dict[str, Callable[[float, float], StrictFeedbackPlant]] = {
    "double-integrator": double_integrator,
}


def make_plant(name: str, x1_bar: float, x2_bar: float) -> StrictFeedbackPlant:
    try:
        factory = PLANTS[name]
    except KeyError:
        raise ConfigError(
            f"unknown plant {name!r}; expected one of {', '.join(PLANTS)}"
        ) from None
    return factory(x1_bar, x2_bar)
