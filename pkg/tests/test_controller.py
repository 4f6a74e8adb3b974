import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liftctl.controller import (
    CommandSignal,
    GainSchedule,
    control,
    error_e1,
    error_e2,
    rho2_switching,
    tracking_errors,
    virtual_target_z2d,
)
from liftctl.exceptions import ConfigError, DomainViolation, Inadmissible
from liftctl.lifted_dynamics import F2, LiftedSystem
from liftctl.lifting import lift
from liftctl.plant import PlantState, double_integrator


def di(x1_bar=2.0, x2_bar=1.0, sigmoid="atanh"):
    return LiftedSystem.from_names(double_integrator(x1_bar, x2_bar), sigmoid)


def z1_of(sys, x1):
    return lift(x1, sys.x1_bar, sys.pair1).z


def z2_of(sys, x2):
    return lift(x2, sys.x2_bar, sys.pair2).z


# -- command ------------------------------------------------------------------

def test_command_parse_and_eval():
    c = CommandSignal.parse("const:0.5")
    assert c(0) == c(99) == 0.5
    s = CommandSignal.parse("sin:A=0.5,omega=0.5")
    assert s(3) == pytest.approx(0.5 * math.sin(1.5))
    assert CommandSignal.parse("sin:A=0.2").omega == 0.1
    assert CommandSignal.parse(str(s)) == s
    for bad in ("ramp:1", "const:x", "sin:B=1", ""):
        with pytest.raises(ConfigError):
            CommandSignal.parse(bad)


def test_command_bounds_and_increment():
    with pytest.raises(ConfigError):
        CommandSignal.constant(2.0).check_bounds(2.0)
    CommandSignal.sinusoid(1.9, 0.3).check_bounds(2.0)
    s = CommandSignal.sinusoid(0.5, 0.5)
    brute = max(abs(s(k + 1) - s(k)) for k in range(100_000))
    assert brute <= s.sup_increment() + 1e-15
    assert brute == pytest.approx(s.sup_increment(), rel=1e-6)
    assert CommandSignal.constant(0.3).sup_increment() == 0.0


# -- errors -------------------------------------------------------------------

@pytest.mark.parametrize("x1,x1d,expected", [(0.1, 0.1, 0.0), (0.5, 0.1, 0.2), (-0.5, 0.5, -0.5)])
def test_error_e1(x1, x1d, expected):
    sys = di()
    assert error_e1(sys, z1_of(sys, x1), CommandSignal.constant(x1d), 0) == pytest.approx(
        expected, abs=1e-15
    )


@pytest.mark.parametrize("x2,x2d,expected", [(0.3, 0.3, 0.0), (0.3, 0.1, 0.2), (-0.4, 0.4, -0.8)])
def test_error_e2(x2, x2d, expected):
    sys = di()
    assert error_e2(sys, z2_of(sys, x2), z2_of(sys, x2d)) == pytest.approx(expected, abs=1e-15)


def test_virtual_target():
    sys = di()
    z1 = z1_of(sys, 0.5)
    z2d = virtual_target_z2d(sys, z1, 0.2, CommandSignal.constant(0.5), 0, 0.0)
    assert z2d == pytest.approx(0.0, abs=1e-15)
    assert virtual_target_z2d(sys, 0.0, 0.0, CommandSignal.constant(0.0), 0, 0.0) == 0.0
    with pytest.raises(Inadmissible):
        virtual_target_z2d(sys, z1_of(sys, -1.5), -1.0, CommandSignal.constant(0.5), 0, 0.0)


# -- gains --------------------------------------------------------------------

@pytest.mark.parametrize("dx,expected", [(0.8, 0.0), (2.0, 0.75), (1.0, 0.5), (-2.0, 0.75), (0.0, 0.0)])
def test_rho2_switching(dx, expected):
    assert rho2_switching(dx, 1.0) == expected


@settings(max_examples=300)
@given(dx=st.floats(-1e6, 1e6), x2_bar=st.floats(1e-3, 1e3))
def test_rho2_switching_range(dx, x2_bar):
    r = rho2_switching(dx, x2_bar)
    assert 0.0 <= r < 1.0


def test_gain_schedule_rules():
    with pytest.raises(ConfigError):
        GainSchedule(0.5)
    assert GainSchedule(0.5, allow_unproven_rho1=True).rho1 == 0.5
    with pytest.raises(ConfigError):
        GainSchedule(1.0, allow_unproven_rho1=True)
    with pytest.raises(ConfigError):
        GainSchedule.parse(0.0, "fixed:1.2")
    with pytest.raises(ConfigError):
        GainSchedule.parse(0.0, "adaptive")
    assert GainSchedule.parse(0.0, "fixed:0.5").rho2 == 0.5
    assert GainSchedule.parse(0.0, "deadbeat").spec() == "deadbeat"
    assert GainSchedule.parse(0.0, "fixed:0.25").spec() == "fixed:0.25"


def test_switch_latches_and_records_violations():
    g = GainSchedule(0.0, "switching")
    assert g.rho2_at(0, 3.0, 1.0) > 0
    assert g.rho2_at(1, 0.5, 1.0) == 0.0
    assert g.switch_step == 1
    assert g.rho2_at(2, 3.0, 1.0) == 0.0
    assert g.switch_violations == [2]
    fresh = g.fresh()
    assert fresh.switch_step is None and fresh.switch_violations == []


# -- control law ----------------------------------------------------------------

@pytest.mark.parametrize("policy", ["deadbeat", "switching"])
def test_control_example(policy):
    sys = di()
    dec = control(sys, PlantState(0.5, 0.3, 0), CommandSignal.constant(0.1), GainSchedule.parse(0, policy))
    # deadbeat double-integrator algebra: u = x1d - x1 - 2 x2
    assert dec.u == pytest.approx(0.1 - 0.5 - 0.6, abs=1e-14)
    assert dec.rho2_k == 0.0
    assert dec.e1 == pytest.approx(0.2)
    assert dec.predicted_F1 == pytest.approx(0.4)
    assert dec.psi2_d_next == pytest.approx(-0.7)
    assert F2(sys, dec.z1, dec.z2, dec.u) == pytest.approx(dec.predicted_psi2_target, abs=1e-10)


def test_control_at_target_is_zero():
    sys = di()
    dec = control(sys, PlantState(0.7, 0.0), CommandSignal.constant(0.7), GainSchedule())
    assert dec.u == pytest.approx(0.0, abs=1e-15)
    assert dec.e1 == 0.0 and dec.e2 == pytest.approx(0.0, abs=1e-15)


def test_control_errors():
    sys = di()
    with pytest.raises(DomainViolation):
        control(sys, PlantState(2.0, 0.0), CommandSignal.constant(0.0), GainSchedule())
    with pytest.raises(Inadmissible):
        # |x1 + x2| >= x1_bar: the next position cannot be lifted
        control(sys, PlantState(1.5, 0.8), CommandSignal.constant(0.0), GainSchedule())


@settings(max_examples=200, deadline=None)
@given(
    x1=st.floats(-1.9, 1.9), x2=st.floats(-0.95, 0.95), d=st.floats(-1.9, 1.9),
    rho2=st.floats(0.0, 0.9), sigmoid=st.sampled_from(["atanh", "tan", "erf", "algebraic"]),
)
def test_control_matches_original_coordinate_algebra(x1, x2, d, rho2, sigmoid):
    sys = di(sigmoid=sigmoid)
    g = GainSchedule(0.0, "fixed", rho2)
    try:
        dec = control(sys, PlantState(x1, x2), CommandSignal.constant(d), g)
    except Inadmissible:
        assert abs(x1 + x2) / 2.0 >= 1 - 1e-9 or abs(rho2 * (x2 - (d - x1)) + d - x1 - x2) >= 1 - 1e-9
        return
    e2 = x2 - (d - x1)
    u_expected = rho2 * e2 + (d - (x1 + x2)) - x2
    assert dec.u == pytest.approx(u_expected, abs=1e-9)
    assert dec.e2 == pytest.approx(e2, abs=1e-12)


def test_tracking_errors_target_outside_unit_interval():
    sys = di()
    err = tracking_errors(sys, PlantState(-1.5, 0.3), CommandSignal.constant(0.5), 0.0)
    assert err.chi2_target == pytest.approx(2.0)
    assert err.e2 == pytest.approx(0.3 - 2.0)
