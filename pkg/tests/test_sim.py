import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liftctl.controller import CommandSignal
from liftctl.exceptions import ConfigError, Exhausted
from liftctl.lifting import StateBounds
from liftctl.sim import (
    CSV_COLUMNS,
    RunConfig,
    draw_initial_condition,
    is_feasible_initial_condition,
    make_rng,
    monte_carlo,
    run,
    sample_initial_conditions,
    trial_config,
)


def test_reference_run_against_oracle(oracle_loop):
    cfg = RunConfig(2.0, 1.0, 0.5, 0.3, steps=20, command=CommandSignal.constant(0.1))
    rec = run(cfg)
    assert rec.success
    xs, us, rhos = oracle_loop(0.5, 0.3, 2.0, 1.0, cfg.command, 20)
    for row, (x1, x2) in zip(rec.rows, xs):
        assert row.x1 == pytest.approx(x1, abs=1e-12)
        assert row.x2 == pytest.approx(x2, abs=1e-12)
    for row, u, r in zip(rec.rows, us, rhos):
        assert row.u == pytest.approx(u, abs=1e-12)
        assert row.rho2 == r
    assert abs(rec.rows[-1].x1 - 0.1) / 2.0 < 1e-10
    assert all(r.in_safe for r in rec.rows)


@pytest.mark.parametrize(
    "bounds,x0,d",
    [((2.0, 1.0), (-1.5, 0.3), 0.5), ((2.0, 1.0), (1.8, -0.9), -1.2), ((1.0, 2.0), (0.4, -1.2), 0.3)],
)
def test_transient_runs_against_oracle(oracle_loop, bounds, x0, d):
    cmd = CommandSignal.constant(d)
    rec = run(RunConfig(*bounds, *x0, steps=30, command=cmd))
    assert rec.success
    xs, us, rhos = oracle_loop(*x0, *bounds, cmd, 30)
    np.testing.assert_allclose(rec.column("x1"), [x for x, _ in xs], atol=1e-11)
    np.testing.assert_allclose(rec.column("x2"), [x for _, x in xs], atol=1e-11)
    np.testing.assert_allclose(rec.column("rho2")[:-1], rhos, atol=1e-12)


def test_sinusoid_run_against_oracle(oracle_loop):
    cmd = CommandSignal.sinusoid(0.5, 0.5)
    rec = run(RunConfig(2.0, 1.0, 0.2, -0.1, steps=40, command=cmd))
    xs, _, _ = oracle_loop(0.2, -0.1, 2.0, 1.0, cmd, 40)
    np.testing.assert_allclose(rec.column("x1"), [x for x, _ in xs], atol=1e-11)


def test_switching_transient_values():
    rec = run(RunConfig(2.0, 1.0, -1.5, 0.3, steps=10, command=CommandSignal.constant(0.5)))
    rho = rec.column("rho2")
    assert rho[0] == pytest.approx(1 - 1 / (2 * 1.7))
    assert rho[1] == pytest.approx(1 - 1 / (2 * 1.2))
    assert rho[2] == 0.0
    assert rec.switch_step == 2
    np.testing.assert_allclose(rec.column("F2")[:2], [0.5, 0.5], atol=1e-12)


def test_equilibrium_run():
    rec = run(RunConfig(2.0, 1.0, 0.3, 0.0, steps=15, command=CommandSignal.constant(0.3)))
    assert np.all(rec.column("u")[:-1] == 0.0)
    assert np.all(np.abs(rec.column("e1")) == 0.0)
    assert np.all(np.abs(rec.column("e2")) < 1e-16)
    assert rec.switch_step == 0


def test_one_step_bookkeeping():
    rec = run(RunConfig(2.0, 1.0, 0.1, 0.1, steps=1))
    assert [r.k for r in rec.rows] == [0, 1]
    assert rec.rows[0].u is not None and rec.rows[1].u is None
    assert rec.rows[1].e1 is not None


def test_record_columns_and_lyapunov():
    rec = run(RunConfig(2.0, 1.0, 0.5, 0.3, steps=10, command=CommandSignal.constant(0.1)))
    assert [r.k for r in rec.rows] == list(range(11))
    for a, b in zip(rec.rows, rec.rows[1:]):
        assert a.V1 == 0.5 * a.e1**2 and a.V2 == 0.5 * a.e2**2
        assert a.dV == pytest.approx((b.V1 + b.V2) - (a.V1 + a.V2))
        # x2_bar < x1_bar with deadbeat: composite V never increases
        assert a.dV <= 1e-15
    csv = rec.to_csv()
    lines = csv.split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[0] == "k,x1,x2,u,z1,z2,x1d,e1,e2,rho2,V1,V2,dV,F1,F2,in_A1,in_A2,in_safe,thm2_lhs,deadbeat_ok"
    assert len(lines) == 13 and lines[-1] == ""
    last = lines[-2].split(",")
    assert last[CSV_COLUMNS.index("u")] == "" and last[CSV_COLUMNS.index("in_safe")] == "true"
    row0 = lines[1].split(",")
    assert float(row0[CSV_COLUMNS.index("x2")]) == 0.3


def test_failure_is_recorded_not_raised():
    # nonzero rho1 leaves the proven regime; this start drives x1 out of range
    cfg = RunConfig(1.0, 2.0, 0.9, 1.5, steps=20, rho1=0.9, allow_unproven_rho1=True,
                    command=CommandSignal.constant(0.0))
    rec = run(cfg)
    assert not rec.success
    assert rec.failure.kind in ("Inadmissible", "DomainViolation")
    assert rec.rows[-1].k == rec.failure.k
    assert rec.rows[-1].u is None


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(2.0, 1.0, 3.0, 0.0)
    with pytest.raises(ConfigError):
        RunConfig(2.0, 1.0, 0.5, None)
    with pytest.raises(ConfigError):
        RunConfig(steps=0)
    with pytest.raises(ConfigError):
        RunConfig(command="const:2.5")
    with pytest.raises(ConfigError):
        RunConfig(seed=-1)
    with pytest.raises(ConfigError):
        RunConfig(sigmoid="relu")
    with pytest.raises(ConfigError):
        RunConfig(rho1=0.3)
    assert RunConfig(command="sin:A=0.5,omega=0.5").command == CommandSignal.sinusoid(0.5, 0.5)


def test_rng_streams():
    a = make_rng(7, 0).random(4)
    assert np.array_equal(a, make_rng(7, 0).random(4))
    assert not np.array_equal(a, make_rng(7, 1).random(4))
    assert not np.array_equal(a, make_rng(8, 0).random(4))
    make_rng(2**64 - 1)
    with pytest.raises(ConfigError):
        make_rng(2**64)


def test_feasibility_oracle():
    b = StateBounds(2.0, 1.0)
    assert not is_feasible_initial_condition(1.5, 0.8, b, 0.0)
    assert not is_feasible_initial_condition(1.5, 0.8, b, 0.0, deadbeat_feasible=False)
    assert is_feasible_initial_condition(0.5, 0.3, b, 0.1)
    assert not is_feasible_initial_condition(-1.5, 0.3, b, 0.5)
    assert is_feasible_initial_condition(-1.5, 0.3, b, 0.5, deadbeat_feasible=False)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), d=st.floats(-1.9, 1.9))
def test_sampler_postcondition(seed, d):
    b = StateBounds(2.0, 1.0)
    for x1, x2 in sample_initial_conditions(b, CommandSignal.constant(d), 5, seed):
        assert is_feasible_initial_condition(x1, x2, b, d)


def test_sampler_determinism_and_exhaustion():
    b = StateBounds(2.0, 1.0)
    cmd = CommandSignal.constant(0.0)
    assert sample_initial_conditions(b, cmd, 20, 3) == sample_initial_conditions(b, cmd, 20, 3)
    with pytest.raises(Exhausted):
        sample_initial_conditions(StateBounds(2.0, 1e-9), CommandSignal.constant(1.9), 1, 0)
    with pytest.raises(Exhausted):
        draw_initial_condition(make_rng(0), StateBounds(2.0, 1e-9), 1.9, max_rejections=5000)


def test_sampled_initial_state_in_run():
    cfg = RunConfig(steps=3, seed=11)
    a, b = run(cfg), run(cfg)
    assert a.to_csv() == b.to_csv()
    assert (a.rows[0].x1, a.rows[0].x2) != (0.0, 0.0)


def test_monte_carlo_example():
    mc = monte_carlo(RunConfig(2.0, 1.0, steps=60), 100, seed=1)
    assert mc.n_success == 100
    assert mc.n_violations == 0
    assert all(t.max_abs_F1 < 1 and t.max_x1_ratio < 1 and t.max_x2_ratio < 1 for t in mc.trials)
    assert [t.trial for t in mc.trials] == list(range(100))


def test_monte_carlo_equilibrium_trial():
    cfg = RunConfig(2.0, 1.0, steps=5, command=CommandSignal.constant(0.0))
    rec = run(trial_config(cfg, 0, 0).replace(x10=0.0, x20=0.0))
    assert rec.switch_step == 0


def test_monte_carlo_direct_deadbeat_fraction():
    mc = monte_carlo(RunConfig(1.0, 2.0, steps=30), 200, seed=2, deadbeat_feasible=False,
                     random_command=True)
    assert mc.fraction(lambda t: t.k_s == 0) >= 0.95


def test_monte_carlo_parallel_matches_serial():
    cfg = RunConfig(2.0, 1.0, steps=20)
    serial = monte_carlo(cfg, 24, seed=5, deadbeat_feasible=False, random_command=True)
    parallel = monte_carlo(cfg, 24, seed=5, deadbeat_feasible=False, random_command=True, workers=2)
    assert serial.to_csv() == parallel.to_csv()


def test_trial_config_streams_are_independent():
    cfg = RunConfig(2.0, 1.0)
    a, b = trial_config(cfg, 9, 0), trial_config(cfg, 9, 1)
    assert (a.x10, a.x20) != (b.x10, b.x20)
    assert trial_config(cfg, 9, 1) == b
    c = trial_config(cfg, 9, 0, random_command=True)
    assert abs(c.command.value) < 2.0


def test_composite_difference_can_increase_when_velocity_bound_dominates():
    # e1[k+1] = (x2_bar/x1_bar) e2[k]; with x2_bar > x1_bar the position error
    # can grow for one step even though e2 is killed.
    rec = run(RunConfig(1.0, 2.0, 0.1, 0.5, steps=5, command=CommandSignal.constant(0.1)))
    assert rec.rows[0].e1 == 0.0 and rec.rows[0].e2 == pytest.approx(0.25)
    assert rec.rows[1].e1 == pytest.approx(0.5)
    assert rec.rows[0].dV == pytest.approx(0.09375)
    assert all(r.dV <= 1e-15 for r in rec.rows[1:-1])
