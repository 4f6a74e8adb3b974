"""Admissible sets of the two lifting maps and per-step hypothesis checks."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._validation import check_count
from .controller import CommandSignal, ControlDecision, GainSchedule, control
from .exceptions import DomainViolation, Inadmissible
from .lifted_dynamics import F1, F2, LiftedSystem
from .lifting import lift
from .plant import PlantState, in_safe_set

__all__ = [
    "AdmissibilityReport",
    "RegionPoint",
    "in_A1",
    "in_A2",
    "regions_to_csv",
    "sample_regions",
    "step_report",
]


@dataclass(frozen=True)
class AdmissibilityReport:
    k: int
    in_A1: bool
    in_A2: bool
    in_safe: bool
    thm2_lhs: float
    deadbeat_ok: bool


def in_A1(sys: LiftedSystem, z1: float, z2: float) -> bool:
    return abs(F1(sys, z1, z2)) < 1.0


def in_A2(sys: LiftedSystem, z1: float, z2: float, u: float) -> bool:
    return abs(F2(sys, z1, z2, u)) < 1.0


def step_report(
    sys: LiftedSystem,
    s: PlantState,
    decision: ControlDecision,
    cmd: CommandSignal,
    k: int,
) -> AdmissibilityReport:
    """Evaluate set membership and the transient/deadbeat hypotheses at step k.

    ``thm2_lhs = |rho2[k]*e2[k] + psi2(zeta2d[k+1])|`` must stay below one
    for the next velocity to be liftable; ``deadbeat_ok`` asks whether the
    choice rho2 = 0 would satisfy the same bound.
    """
    z1, z2 = decision.z1, decision.z2
    return AdmissibilityReport(
        k=k,
        in_A1=in_A1(sys, z1, z2),
        in_A2=in_A2(sys, z1, z2, decision.u),
        in_safe=in_safe_set(sys.plant, s),
        thm2_lhs=abs(decision.rho2_k * decision.e2 + decision.psi2_d_next),
        deadbeat_ok=abs(decision.psi2_d_next) < 1.0,
    )


@dataclass(frozen=True)
class RegionPoint:
    x1: float
    x2: float
    in_A1: bool
    in_A2: bool


def _classify(
    sys: LiftedSystem, x1: float, x2: float, rho2: float, cmd: CommandSignal, k: int
) -> RegionPoint:
    try:
        z1 = lift(x1, sys.x1_bar, sys.pair1).z
        z2 = lift(x2, sys.x2_bar, sys.pair2).z
    except DomainViolation:
        return RegionPoint(x1, x2, False, False)
    a1 = in_A1(sys, z1, z2)
    gains = GainSchedule(0.0, "fixed", rho2)
    try:
        decision = control(sys, PlantState(x1, x2, k), cmd, gains)
    except (Inadmissible, DomainViolation):
        return RegionPoint(x1, x2, a1, False)
    return RegionPoint(x1, x2, a1, in_A2(sys, z1, z2, decision.u))


def sample_regions(
    sys: LiftedSystem,
    rho2: float,
    cmd: CommandSignal,
    k: int = 0,
    resolution: int = 101,
) -> list[RegionPoint]:
    """Membership of a uniform grid on the closed safe box.

    The control input at each node comes from the backstepping law with the
    second-step gain frozen at ``rho2`` (rho1 = 0).  Points that cannot be
    lifted, or where the controller reports an inadmissible move, are
    flagged False rather than raising.  Rows are ordered x1-major.
    """
    resolution = check_count("resolution", resolution, minimum=2)
    x1s = np.linspace(-sys.x1_bar, sys.x1_bar, resolution)
    x2s = np.linspace(-sys.x2_bar, sys.x2_bar, resolution)
    return [
        _classify(sys, float(a), float(b), rho2, cmd, k) for a in x1s for b in x2s
    ]


def regions_to_csv(points: Iterable[RegionPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x1", "x2", "in_A1", "in_A2"])
    for p in points:
        w.writerow([f"{p.x1:.17g}", f"{p.x2:.17g}", _b(p.in_A1), _b(p.in_A2)])
    return buf.getvalue()


def _b(flag: bool) -> str:
    return "true" if flag else "false"
