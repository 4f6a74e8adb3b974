"""Executable oracles for the stability and invariance claims.

Every trajectory check recomputes the tracking errors from the raw
``x1, x2`` columns in original coordinates,

    e1[k]  = (x1[k] - x1d[k]) / x1_bar
    x2d[k] = (x1_bar*(rho1*e1[k] + x1d[k+1]/x1_bar) - f1(x1[k])) / g1(x1[k])
    e2[k]  = (x2[k] - x2d[k]) / x2_bar

so none of them trusts the lifted quantities logged by the simulator.
Only the emitted gains rho2[k] are taken from the record.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._validation import check_count
from .controller import CommandSignal
from .exceptions import NoSwitch
from .plant import make_plant
from .sim import RunConfig, TrajectoryRecord, monte_carlo, run, trial_config

__all__ = [
    "CheckRow",
    "ContractionReport",
    "DeadbeatReport",
    "Report",
    "VanishingContractionProbe",
    "check_contraction_identities",
    "check_deadbeat",
    "check_geometry",
    "check_forward_invariance",
    "check_vanishing_contraction",
    "raw_errors",
    "run_suite",
    "SUITES",
]

IDENTITY_REL_TOL = 1e-9
IDENTITY_ABS_TOL = 1e-12
RECURSION_TOL = 1e-10


@dataclass(frozen=True)
class CheckRow:
    check: str
    step: int
    expected: float
    actual: float
    tol: float
    passed: bool


@dataclass
class Report:
    name: str
    rows: list[CheckRow] = field(default_factory=list)

    def add(self, check: str, step: int, expected: float, actual: float, tol: float,
            passed: bool | None = None) -> None:
        if passed is None:
            passed = abs(actual - expected) <= tol
        self.rows.append(CheckRow(check, step, float(expected), float(actual), float(tol), bool(passed)))

    def extend(self, other: "Report") -> None:
        self.rows.extend(other.rows)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def failures(self) -> list[CheckRow]:
        return [r for r in self.rows if not r.passed]

    def first_failure(self, check: str | None = None) -> CheckRow | None:
        for r in self.rows:
            if not r.passed and (check is None or r.check == check):
                return r
        return None

    def only(self, check: str) -> list[CheckRow]:
        return [r for r in self.rows if r.check == check]

    def lines(self) -> list[str]:
        """One line per distinct check name, in first-appearance order."""
        names = list(dict.fromkeys(r.check for r in self.rows))
        out = []
        for n in names:
            rows = self.only(n)
            bad = [r for r in rows if not r.passed]
            if bad:
                f = bad[0]
                out.append(
                    f"FAIL {self.name}/{n}: {len(bad)}/{len(rows)} steps violate; first at "
                    f"step {f.step} (expected {f.expected:.6g}, actual {f.actual:.6g}, tol {f.tol:.1e})"
                )
            else:
                out.append(f"PASS {self.name}/{n}: {len(rows)} steps")
        return out

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["check", "step", "expected", "actual", "tol", "pass"])
        for r in self.rows:
            w.writerow([
                f"{self.name}/{r.check}", r.step, f"{r.expected:.17g}", f"{r.actual:.17g}",
                f"{r.tol:.17g}", "true" if r.passed else "false",
            ])
        return buf.getvalue()


def _rel_tol(expected: float, actual: float) -> float:
    return max(IDENTITY_REL_TOL * max(abs(expected), abs(actual)), IDENTITY_ABS_TOL)


# -- vanishing contraction ----------------------------------------------------------

@dataclass(frozen=True)
class VanishingContractionProbe:
    """Scalar recursion ``V[k+1] = rho(k)**2 * V[k]`` over ``horizon`` steps."""

    rho: Callable[[int], float]
    v0: float
    horizon: int

    def __post_init__(self):
        check_count("horizon", self.horizon)
        if not (math.isfinite(self.v0) and self.v0 >= 0.0):
            raise ValueError(f"V0 must be finite and nonnegative, got {self.v0!r}")


@dataclass
class ContractionReport(Report):
    monotone: bool = True
    V_final: float = math.nan
    values: np.ndarray | None = None


def _closed_form_product(rhos: list[float], v0: float) -> list[float]:
    """V0 * prod(rho_i^2) via a compensated sum of logarithms."""
    out = [v0]
    logs = []
    dead = v0 == 0.0
    for r in rhos:
        if r == 0.0:
            dead = True
        else:
            logs.append(2.0 * math.log(abs(r)))
        out.append(0.0 if dead else v0 * math.exp(math.fsum(logs)))
    return out


def check_vanishing_contraction(
    probe: VanishingContractionProbe, threshold: float = 1e-12
) -> ContractionReport:
    """Iterate the contraction and confirm it is nonincreasing and vanishes.

    Values are also compared, to 1e-12 relative, with an independently
    computed product of the squared gains wherever that product is a normal
    double.
    """
    rep = ContractionReport("proposition")
    rhos = [float(probe.rho(k)) for k in range(probe.horizon)]
    V = [float(probe.v0)]
    for k, r in enumerate(rhos):
        rep.add("rho_bound", k, 1.0, abs(r), 0.0, passed=abs(r) < 1.0)
        V.append(r * r * V[-1])
        ok = 0.0 <= V[k + 1] <= V[k]
        rep.add("monotone", k, V[k], V[k + 1], 0.0, passed=ok)
        rep.monotone &= ok
    closed = _closed_form_product(rhos, probe.v0)
    for k, (a, e) in enumerate(zip(V, closed)):
        if abs(e) < 1e-290 and abs(a) < 1e-290:
            continue
        rep.add("closed_form", k, e, a, 1e-12 * max(abs(a), abs(e)))
    rep.V_final = V[-1]
    rep.values = np.array(V)
    rep.add("vanishes", probe.horizon, 0.0, V[-1], threshold, passed=V[-1] < threshold)
    return rep


# -- trajectory checks ------------------------------------------------------------

def raw_errors(traj: TrajectoryRecord) -> tuple[np.ndarray, np.ndarray]:
    """e1, e2 for every row, from raw states and the configured command."""
    cfg = traj.config
    plant = make_plant(cfg.plant, cfg.x1_bar, cfg.x2_bar)
    x1_bar, x2_bar = cfg.x1_bar, cfg.x2_bar
    cmd = cfg.command
    e1 = np.empty(len(traj.rows))
    e2 = np.empty(len(traj.rows))
    for i, r in enumerate(traj.rows):
        k = r.k
        x1d_k = cmd(k)
        x1d_next = x1d_k if cfg.freeze_command else cmd(k + 1)
        e1[i] = (r.x1 - x1d_k) / x1_bar
        x2d = (x1_bar * (cfg.rho1 * e1[i] + x1d_next / x1_bar) - plant.f1(r.x1)) / plant.g1(r.x1)
        e2[i] = (r.x2 - x2d) / x2_bar
    return e1, e2


def _control_rows(traj: TrajectoryRecord) -> list[int]:
    return [i for i, r in enumerate(traj.rows) if r.u is not None]


def check_contraction_identities(traj: TrajectoryRecord, gains=None) -> Report:
    """Per-step Lyapunov differences and error recursions.

    ``dV1``: V1[k+1] - V1[k] == (rho1^2 - 1) V1[k]
    ``dV2``: V2[k+1] - V2[k] == (rho2[k]^2 - 1) V2[k]
    ``e2_recursion``: e2[k+1] == rho2[k] e2[k]
    ``e1_recursion``: e1[k+1] == rho1 e1[k] + (x2_bar/x1_bar) g1(x1[k]) e2[k]

    The ``dV1`` identity presumes the velocity already equals its virtual
    target; it is checked literally at every step, so steps with e2[k] != 0
    show up as failures.
    """
    cfg = traj.config
    rho1 = cfg.rho1 if gains is None else gains.rho1
    plant = make_plant(cfg.plant, cfg.x1_bar, cfg.x2_bar)
    e1, e2 = raw_errors(traj)
    V1, V2 = 0.5 * e1**2, 0.5 * e2**2
    rep = Report("identities")
    ratio = cfg.x2_bar / cfg.x1_bar
    for i in _control_rows(traj):
        if i + 1 >= len(traj.rows):
            break
        r = traj.rows[i]
        rho2 = r.rho2
        exp1, act1 = (rho1**2 - 1.0) * V1[i], V1[i + 1] - V1[i]
        rep.add("dV1", r.k, exp1, act1, _rel_tol(exp1, act1))
        exp2, act2 = (rho2**2 - 1.0) * V2[i], V2[i + 1] - V2[i]
        rep.add("dV2", r.k, exp2, act2, _rel_tol(exp2, act2))
        rep.add("e2_recursion", r.k, rho2 * e2[i], e2[i + 1], RECURSION_TOL)
        rep.add("e1_recursion", r.k, rho1 * e1[i] + ratio * plant.g1(r.x1) * e2[i], e1[i + 1],
                RECURSION_TOL)
        rep.add("rho2_bound", r.k, 1.0, abs(rho2), 0.0, passed=abs(rho2) < 1.0)
    return rep


def check_forward_invariance(traj: TrajectoryRecord) -> Report:
    """Admissibility of both lifting maps and safety at every logged step.

    ``thm2_implication`` checks that whenever ``|rho2 e2 + psi2(zeta2d[k+1])|``
    was below one at step k, the velocity at k+1 could be lifted.
    """
    cfg = traj.config
    rep = Report("invariance")
    rows = traj.rows
    for i, r in enumerate(rows):
        rep.add("safe_x1", r.k, 1.0, abs(r.x1) / cfg.x1_bar, 0.0, passed=abs(r.x1) < cfg.x1_bar)
        rep.add("safe_x2", r.k, 1.0, abs(r.x2) / cfg.x2_bar, 0.0, passed=abs(r.x2) < cfg.x2_bar)
        if r.F1 is not None:
            rep.add("F1_admissible", r.k, 1.0, abs(r.F1), 0.0, passed=abs(r.F1) < 1.0)
        if r.F2 is not None:
            rep.add("F2_admissible", r.k, 1.0, abs(r.F2), 0.0, passed=abs(r.F2) < 1.0)
        if r.thm2_lhs is not None and r.thm2_lhs < 1.0:
            lifted = i + 1 < len(rows) and rows[i + 1].z2 is not None
            rep.add("thm2_implication", r.k, 1.0, 1.0 if lifted else 0.0, 0.0, passed=lifted)
    fail = traj.failure
    rep.add("completed", fail.k if fail else cfg.steps, cfg.steps,
            fail.k if fail else cfg.steps, 0.0, passed=fail is None)
    return rep


@dataclass
class DeadbeatReport(Report):
    k_s: int | None = None
    e2_zero_after: bool = False
    e1_zero_within_n: bool = False


def check_deadbeat(
    traj: TrajectoryRecord, e2_tol: float = 1e-12, e1_tol: float = 1e-10
) -> DeadbeatReport:
    """Locate the switching step and confirm deadbeat convergence after it.

    ``k_s`` is the first control step from which every emitted rho2 is zero.
    After it, |e2| <= e2_tol for k > k_s and, when rho1 = 0, |e1| <= e1_tol
    for k >= k_s + 2.  Raises NoSwitch if rho2 is still nonzero at the end.
    """
    idx = _control_rows(traj)
    if not idx:
        raise NoSwitch("trajectory has no control steps")
    rho2 = [traj.rows[i].rho2 for i in idx]
    if rho2[-1] != 0.0:
        raise NoSwitch(f"rho2 is still {rho2[-1]!r} at the last step")
    j = len(rho2)
    while j > 0 and rho2[j - 1] == 0.0:
        j -= 1
    k_s = traj.rows[idx[j]].k
    e1, e2 = raw_errors(traj)
    rep = DeadbeatReport("deadbeat", k_s=k_s)
    e2_ok = e1_ok = True
    for i, r in enumerate(traj.rows):
        if r.k > k_s:
            ok = abs(e2[i]) <= e2_tol
            rep.add("e2_zero", r.k, 0.0, e2[i], e2_tol, passed=ok)
            e2_ok &= ok
        if traj.config.rho1 == 0.0 and r.k >= k_s + 2:
            ok = abs(e1[i]) <= e1_tol
            rep.add("e1_zero", r.k, 0.0, e1[i], e1_tol, passed=ok)
            e1_ok &= ok
    rep.e2_zero_after = e2_ok
    rep.e1_zero_within_n = e1_ok
    return rep


# -- built-in suites --------------------------------------------------------------------

def _suite_proposition() -> Report:
    rep = Report("proposition")
    for probe in (
        VanishingContractionProbe(lambda k: 0.9 * 0.99**k, 1.0, 500),
        VanishingContractionProbe(lambda k: 0.0, 7.0, 50),
        VanishingContractionProbe(lambda k: 0.5, 0.0, 50),
    ):
        rep.extend(check_vanishing_contraction(probe))
    return rep


def _identity_scenarios() -> list[RunConfig]:
    return [
        RunConfig(2.0, 1.0, 0.5, 0.3, steps=100, command=CommandSignal.constant(0.1), seed=7),
        RunConfig(2.0, 1.0, -1.5, 0.3, steps=100, command=CommandSignal.constant(0.5), seed=7),
        RunConfig(1.0, 2.0, 0.4, -0.2, steps=100, command=CommandSignal.constant(-0.3), seed=7),
    ]


def _suite_identities() -> Report:
    rep = Report("identities")
    for cfg in _identity_scenarios():
        rep.extend(check_contraction_identities(run(cfg)))
    return rep


def _suite_invariance(trials: int = 100, steps: int = 200, seed: int = 7) -> Report:
    rep = Report("invariance")
    for x1_bar, x2_bar in ((2.0, 1.0), (1.0, 2.0)):
        template = RunConfig(x1_bar, x2_bar, steps=steps, seed=seed)
        for i in range(trials):
            cfg = trial_config(template, seed, i, deadbeat_feasible=False, random_command=True)
            rep.extend(check_forward_invariance(run(cfg)))
    return rep


def _suite_deadbeat() -> Report:
    rep = Report("deadbeat")
    for cfg in _identity_scenarios():
        rep.extend(check_deadbeat(run(cfg)))
    return rep


def check_geometry(
    trials: int = 1000, steps: int = 50, seed: int = 7, min_direct: float = 0.95
) -> Report:
    """Switching behaviour in the two bound regimes.

    With x1_bar < x2_bar at least ``min_direct`` of the sampled trials should
    switch to the deadbeat gain at k = 0; with x1_bar > x2_bar some trials
    should pass through a transient with 0 < rho2 < 1 before switching.
    Initial states are sampled without the deadbeat-feasibility filter and
    each trial gets its own random constant command.
    """
    rep = Report("geometry")
    narrow = monte_carlo(RunConfig(1.0, 2.0, steps=steps, seed=seed), trials, seed,
                         deadbeat_feasible=False, random_command=True)
    direct = narrow.fraction(lambda t: t.k_s == 0)
    rep.add("direct_deadbeat", 0, min_direct, direct, 0.0, passed=direct >= min_direct)
    wide = monte_carlo(RunConfig(2.0, 1.0, steps=steps, seed=seed), trials, seed,
                       deadbeat_feasible=False, random_command=True)
    delayed = wide.fraction(lambda t: t.k_s is not None and t.k_s > 0 and t.transient)
    rep.add("transient_switch", 0, 0.0, delayed, 0.0, passed=delayed > 0.0)
    return rep


def _suite_geometry() -> Report:
    return check_geometry(trials=200)


SUITES: dict[str, Callable[[], Report]] = {
    "proposition": _suite_proposition,
    "identities": _suite_identities,
    "invariance": _suite_invariance,
    "deadbeat": _suite_deadbeat,
    "geometry": _suite_geometry,
}


def run_suite(name: str) -> list[Report]:
    """Run one named suite, or every suite for ``"all"``."""
    if name == "all":
        return [fn() for fn in SUITES.values()]
    try:
        return [SUITES[name]()]
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; expected all or one of {', '.join(SUITES)}") from None
