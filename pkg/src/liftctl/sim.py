"""Closed-loop simulation, initial-condition sampling and Monte Carlo batches.

Randomness comes from numpy's counter-based Philox4x64-10 generator.  A
stream is keyed by ``seed | (stream << 64)``; uniforms use numpy's 53-bit
mantissa convention (``Generator.random``).  Monte Carlo trial ``i`` uses
stream ``i + 1``; :func:`sample_initial_conditions` and IC sampling inside
:func:`run` use stream 0.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_count
from .admissibility import step_report
from .controller import CommandSignal, GainSchedule, control, tracking_errors
from .exceptions import (
    ConfigError,
    DomainViolation,
    Exhausted,
    Inadmissible,
    InverseMismatch,
    LiftctlError,
    NonFinite,
    SingularG,
)
from .lifted_dynamics import F1, F2, LiftedSystem
from .lifting import DEFAULT_GUARD_BAND, StateBounds, get_pair
from .plant import PlantState, in_safe_set, make_plant, step

__all__ = [
    "CSV_COLUMNS",
    "MonteCarloSummary",
    "RunConfig",
    "StepFailure",
    "TrajectoryRecord",
    "TrajectoryRow",
    "TrialResult",
    "draw_initial_condition",
    "is_feasible_initial_condition",
    "make_rng",
    "monte_carlo",
    "run",
    "sample_initial_conditions",
    "summarize",
    "trial_config",
]

CSV_COLUMNS = (
    "k", "x1", "x2", "u", "z1", "z2", "x1d", "e1", "e2", "rho2", "V1", "V2", "dV",
    "F1", "F2", "in_A1", "in_A2", "in_safe", "thm2_lhs", "deadbeat_ok",
)

MAX_REJECTIONS = 10**6
_BATCH = 1024
_STEP_ERRORS = (Inadmissible, DomainViolation, SingularG, InverseMismatch, NonFinite)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    if not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    return np.random.Generator(np.random.Philox(key=int(seed) | (int(stream) << 64)))


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one closed-loop run.

    Leaving ``x10``/``x20`` as None samples the initial state from ``seed``.
    """

    x1_bar: float = 2.0
    x2_bar: float = 1.0
    x10: float | None = None
    x20: float | None = None
    steps: int = 50
    command: CommandSignal = field(default_factory=lambda: CommandSignal.constant(0.0))
    rho1: float = 0.0
    rho2: str = "switching"
    sigmoid: str = "atanh"
    sigmoid2: str | None = None
    plant: str = "double-integrator"
    seed: int = 0
    freeze_command: bool = False
    allow_unproven_rho1: bool = False
    guard_band: float = DEFAULT_GUARD_BAND
    deadbeat_feasible_ic: bool = True

    def __post_init__(self):
        check_count("steps", self.steps, minimum=1)
        if isinstance(self.command, str):
            object.__setattr__(self, "command", CommandSignal.parse(self.command))
        bounds = StateBounds(self.x1_bar, self.x2_bar)
        self.command.check_bounds(bounds.x1_bar)
        make_rng(self.seed)
        get_pair(self.sigmoid, self.guard_band)
        get_pair(self.sigmoid2 or self.sigmoid, self.guard_band)
        self.gains()
        if (self.x10 is None) != (self.x20 is None):
            raise ConfigError("x10 and x20 must be given together")
        if self.x10 is not None:
            x1, x2 = float(self.x10), float(self.x20)
            if not (abs(x1) < bounds.x1_bar and abs(x2) < bounds.x2_bar):
                raise ConfigError(
                    f"initial state ({x1!r}, {x2!r}) is not strictly inside the safe set "
                    f"|x1| < {bounds.x1_bar!r}, |x2| < {bounds.x2_bar!r}"
                )

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @property
    def bounds(self) -> StateBounds:
        return StateBounds(self.x1_bar, self.x2_bar)

    def system(self) -> LiftedSystem:
        plant = make_plant(self.plant, self.x1_bar, self.x2_bar)
        return LiftedSystem.from_names(plant, self.sigmoid, self.sigmoid2, self.guard_band)

    def gains(self) -> GainSchedule:
        return GainSchedule.parse(self.rho1, self.rho2, self.allow_unproven_rho1)

    def initial_state(self) -> PlantState:
        if self.x10 is not None:
            return PlantState(float(self.x10), float(self.x20), 0)
        x1, x2 = draw_initial_condition(
            make_rng(self.seed), self.bounds, self.command(0), self.deadbeat_feasible_ic
        )
        return PlantState(x1, x2, 0)


# -- records ------------------------------------------------------------------

@dataclass
class TrajectoryRow:
    k: int
    x1: float
    x2: float
    x1d: float
    in_safe: bool
    u: float | None = None
    z1: float | None = None
    z2: float | None = None
    zeta1: float | None = None
    zeta2: float | None = None
    e1: float | None = None
    e2: float | None = None
    rho2: float | None = None
    V1: float | None = None
    V2: float | None = None
    dV: float | None = None
    F1: float | None = None
    F2: float | None = None
    in_A1: bool | None = None
    in_A2: bool | None = None
    thm2_lhs: float | None = None
    deadbeat_ok: bool | None = None
    ks_engaged: bool = False


@dataclass(frozen=True)
class StepFailure:
    k: int
    kind: str
    message: str


@dataclass
class TrajectoryRecord:
    """Rows ``k = 0..K``: K control rows plus the terminal state.

    A failed run stops at the failing step; that row carries whatever
    could be evaluated and ``failure`` says what went wrong.
    """

    config: RunConfig
    rows: list[TrajectoryRow]
    failure: StepFailure | None = None
    switch_step: int | None = None
    switch_violations: list[int] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.failure is None

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        """One field across all rows as float64; missing values become NaN."""
        return np.array(
            [np.nan if getattr(r, name) is None else float(getattr(r, name)) for r in self.rows],
            dtype=float,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


# -- closed loop --------------------------------------------------------------

def _observe(sys: LiftedSystem, s: PlantState, cmd: CommandSignal, rho1: float) -> TrajectoryRow:
    """Row for a state at which no control was applied."""
    row = TrajectoryRow(k=s.k, x1=s.x1, x2=s.x2, x1d=cmd(s.k), in_safe=in_safe_set(sys.plant, s))
    try:
        err = tracking_errors(sys, s, cmd, rho1)
    except LiftctlError:
        return row
    row.z1, row.z2 = err.z1, err.z2
    row.zeta1, row.zeta2 = err.z1 / sys.x1_bar, err.z2 / sys.x2_bar
    row.e1, row.e2 = err.e1, err.e2
    row.V1, row.V2 = 0.5 * err.e1**2, 0.5 * err.e2**2
    row.F1 = F1(sys, err.z1, err.z2)
    row.in_A1 = abs(row.F1) < 1.0
    return row


def run(cfg: RunConfig) -> TrajectoryRecord:
    """Simulate lift -> control -> plant step for ``cfg.steps`` samples.

    The plant itself is propagated in original coordinates; the controller
    only ever sees the lifted state.  Step failures end the run and are
    stored in the record instead of being raised.
    """
    sys = cfg.system()
    gains = cfg.gains()
    cmd = cfg.command
    s = cfg.initial_state()
    rows: list[TrajectoryRow] = []
    failure = None

    for k in range(cfg.steps):
        view = cmd.frozen_at(k) if cfg.freeze_command else cmd
        try:
            dec = control(sys, s, cmd, gains, cfg.freeze_command)
            rep = step_report(sys, s, dec, view, k)
            f2 = F2(sys, dec.z1, dec.z2, dec.u)
            s_next = step(sys.plant, s, dec.u)
        except _STEP_ERRORS as exc:
            row = _observe(sys, s, view, gains.rho1)
            row.ks_engaged = gains.switch_step is not None and gains.switch_step <= k
            rows.append(row)
            failure = StepFailure(k, type(exc).__name__, str(exc))
            break
        rows.append(
            TrajectoryRow(
                k=k, x1=s.x1, x2=s.x2, x1d=view(k), in_safe=rep.in_safe, u=dec.u,
                z1=dec.z1, z2=dec.z2, zeta1=dec.z1 / sys.x1_bar, zeta2=dec.z2 / sys.x2_bar,
                e1=dec.e1, e2=dec.e2, rho2=dec.rho2_k,
                V1=0.5 * dec.e1**2, V2=0.5 * dec.e2**2,
                F1=dec.predicted_F1, F2=f2, in_A1=rep.in_A1, in_A2=rep.in_A2,
                thm2_lhs=rep.thm2_lhs, deadbeat_ok=rep.deadbeat_ok,
                ks_engaged=gains.switch_step is not None and gains.switch_step <= k,
            )
        )
        s = s_next
    else:
        view = cmd.frozen_at(s.k) if cfg.freeze_command else cmd
        row = _observe(sys, s, view, gains.rho1)
        row.ks_engaged = gains.switch_step is not None
        rows.append(row)
        if row.z1 is None:
            failure = StepFailure(s.k, "DomainViolation", "terminal state cannot be lifted")

    for a, b in zip(rows, rows[1:]):
        if a.u is not None and a.V1 is not None and b.V1 is not None:
            a.dV = (b.V1 + b.V2) - (a.V1 + a.V2)

    return TrajectoryRecord(
        config=cfg,
        rows=rows,
        failure=failure,
        switch_step=gains.switch_step,
        switch_violations=list(gains.switch_violations),
    )


# -- initial conditions ---------------------------------------------------------

def is_feasible_initial_condition(
    x1: float, x2: float, bounds: StateBounds, x1d0: float, deadbeat_feasible: bool = True
) -> bool:
    """Double-integrator admissibility of a starting state.

    Always requires the safe box and ``|x1 + x2| < x1_bar``; with
    ``deadbeat_feasible`` also ``|x1 + x2 - x1d0| < x2_bar``, which makes
    the deadbeat gain admissible from the first step.
    """
    ok = abs(x1) < bounds.x1_bar and abs(x2) < bounds.x2_bar and abs(x1 + x2) < bounds.x1_bar
    if deadbeat_feasible:
        ok = ok and abs(x1 + x2 - x1d0) < bounds.x2_bar
    return ok


def draw_initial_condition(
    rng: np.random.Generator,
    bounds: StateBounds,
    x1d0: float,
    deadbeat_feasible: bool = True,
    max_rejections: int = MAX_REJECTIONS,
) -> tuple[float, float]:
    """First feasible uniform candidate from blocks of 1024 draws."""
    scale = np.array([bounds.x1_bar, bounds.x2_bar])
    rejected = 0
    while rejected < max_rejections:
        cand = (2.0 * rng.random((_BATCH, 2)) - 1.0) * scale
        c1, c2 = cand[:, 0], cand[:, 1]
        s = c1 + c2
        ok = (np.abs(c1) < bounds.x1_bar) & (np.abs(c2) < bounds.x2_bar) & (np.abs(s) < bounds.x1_bar)
        if deadbeat_feasible:
            ok &= np.abs(s - x1d0) < bounds.x2_bar
        hits = np.flatnonzero(ok)
        if hits.size and rejected + hits[0] < max_rejections:
            i = hits[0]
            return float(c1[i]), float(c2[i])
        rejected += _BATCH
    raise Exhausted(
        f"no feasible initial condition after {max_rejections} rejections "
        f"(bounds {bounds.x1_bar!r}, {bounds.x2_bar!r}; x1d0 = {x1d0!r})"
    )


def sample_initial_conditions(
    bounds: StateBounds,
    cmd: CommandSignal,
    n: int,
    seed: int,
    deadbeat_feasible: bool = True,
    max_rejections: int = MAX_REJECTIONS,
) -> list[tuple[float, float]]:
    n = check_count("n", n)
    rng = make_rng(seed)
    x1d0 = cmd(0)
    return [
        draw_initial_condition(rng, bounds, x1d0, deadbeat_feasible, max_rejections)
        for _ in range(n)
    ]


# -- Monte Carlo ----------------------------------------------------------------

MC_COLUMNS = (
    "trial", "x10", "x20", "x1d0", "success", "failure", "failure_step", "steps",
    "max_abs_F1", "max_abs_F2", "max_x1_ratio", "max_x2_ratio", "k_s",
    "max_rho2", "transient", "switch_violations", "terminal_abs_e1",
)


@dataclass(frozen=True)
class TrialResult:
    trial: int
    x10: float
    x20: float
    x1d0: float
    success: bool
    failure: str | None
    failure_step: int | None
    steps: int
    max_abs_F1: float
    max_abs_F2: float
    max_x1_ratio: float
    max_x2_ratio: float
    k_s: int | None
    max_rho2: float
    transient: bool
    switch_violations: int
    terminal_abs_e1: float

    @property
    def constraint_violations(self) -> int:
        return sum(
            v >= 1.0
            for v in (self.max_abs_F1, self.max_abs_F2, self.max_x1_ratio, self.max_x2_ratio)
        )


@dataclass
class MonteCarloSummary:
    trials: list[TrialResult]

    def __len__(self) -> int:
        return len(self.trials)

    @property
    def n_success(self) -> int:
        return sum(t.success for t in self.trials)

    @property
    def n_violations(self) -> int:
        """Trials in which some |F1|, |F2|, |x1|/x1_bar or |x2|/x2_bar reached 1."""
        return sum(t.constraint_violations > 0 for t in self.trials)

    def fraction(self, predicate) -> float:
        return sum(bool(predicate(t)) for t in self.trials) / len(self.trials)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(MC_COLUMNS)
        for t in self.trials:
            w.writerow([_fmt(getattr(t, c)) for c in MC_COLUMNS])
        return buf.getvalue()


def _nanmax_abs(values: np.ndarray) -> float:
    values = values[~np.isnan(values)]
    return float(np.max(np.abs(values))) if values.size else math.nan


def summarize(trial: int, rec: TrajectoryRecord) -> TrialResult:
    cfg = rec.config
    rho2 = rec.column("rho2")
    rho2 = rho2[~np.isnan(rho2)]
    last = rec.rows[-1]
    return TrialResult(
        trial=trial,
        x10=rec.rows[0].x1,
        x20=rec.rows[0].x2,
        x1d0=cfg.command(0),
        success=rec.success,
        failure=rec.failure.kind if rec.failure else None,
        failure_step=rec.failure.k if rec.failure else None,
        steps=sum(r.u is not None for r in rec.rows),
        max_abs_F1=_nanmax_abs(rec.column("F1")),
        max_abs_F2=_nanmax_abs(rec.column("F2")),
        max_x1_ratio=_nanmax_abs(rec.column("x1")) / cfg.x1_bar,
        max_x2_ratio=_nanmax_abs(rec.column("x2")) / cfg.x2_bar,
        k_s=rec.switch_step,
        max_rho2=float(rho2.max()) if rho2.size else math.nan,
        transient=bool(np.any((rho2 > 0.0) & (rho2 < 1.0))),
        switch_violations=len(rec.switch_violations),
        terminal_abs_e1=abs(last.x1 - cfg.command(last.k)) / cfg.x1_bar,
    )


def trial_config(
    template: RunConfig,
    seed: int,
    i: int,
    deadbeat_feasible: bool = True,
    random_command: bool = False,
) -> RunConfig:
    """Configuration of Monte Carlo trial ``i`` (command and IC drawn from stream i+1)."""
    rng = make_rng(seed, i + 1)
    cmd = template.command
    bounds = template.bounds
    if random_command:
        limit = bounds.x1_bar * (1.0 - template.guard_band)
        while True:
            x1d = (2.0 * rng.random() - 1.0) * bounds.x1_bar
            if abs(x1d) < limit:
                break
        cmd = CommandSignal.constant(x1d)
    x10, x20 = draw_initial_condition(rng, bounds, cmd(0), deadbeat_feasible)
    return template.replace(x10=x10, x20=x20, command=cmd)


def _trial(template: RunConfig, seed: int, i: int, deadbeat_feasible: bool,
           random_command: bool) -> TrialResult:
    return summarize(i, run(trial_config(template, seed, i, deadbeat_feasible, random_command)))


def monte_carlo(
    template: RunConfig,
    trials: int,
    seed: int,
    deadbeat_feasible: bool = True,
    random_command: bool = False,
    workers: int = 1,
) -> MonteCarloSummary:
    """Run ``trials`` closed loops from sampled initial conditions.

    ``random_command`` draws a constant command uniformly on
    (-x1_bar, x1_bar) per trial.  Results are ordered by trial index
    whatever ``workers`` is.
    """
    trials = check_count("trials", trials)
    make_rng(seed)
    args = [(template, seed, i, deadbeat_feasible, random_command) for i in range(trials)]
    if workers <= 1:
        results = [_trial(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial, *zip(*args), chunksize=16))
    return MonteCarloSummary(sorted(results, key=lambda t: t.trial))
