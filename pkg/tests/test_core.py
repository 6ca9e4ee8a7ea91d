import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from drcc_ems.core import (BatterySpec, CostReport, DomainError, EvSession, LoadProfile,
                           Schedule, gasoline_equivalent, soc_update, validate_instance)
from drcc_ems.ingest import synth_instance

from conftest import toy_instance

finite = st.floats(0, 1e4, allow_nan=False)
eff = st.floats(0.05, 1.0)


@pytest.mark.parametrize("args, expected", [
    ((100, 10, 0, 0.9, 1.0), 109.0),
    ((100, 0, 0, 0.9, 1.0), 100.0),
    ((109, 0, 9, 0.9, 1.0), 99.0),
])
def test_soc_update_examples(args, expected):
    assert soc_update(*args) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("args", [
    (0, 1, 0, 0.0, 1.0), (0, 1, 0, 1.2, 1.0), (0, 1, 0, 0.9, 0.0), (0, -1, 0, 0.9, 1.0),
])
def test_soc_update_domain(args):
    with pytest.raises(DomainError):
        soc_update(*args)


@given(soc=finite, c1=finite, c2=finite, d=finite, e=eff)
def test_soc_update_linear_and_monotone(soc, c1, c2, d, e):
    lo, hi = sorted((c1, c2))
    assert soc_update(soc, lo, d, e, 1.0) <= soc_update(soc, hi, d, e, 1.0) + 1e-9
    assert soc_update(soc, d, hi, e, 1.0) <= soc_update(soc, d, lo, e, 1.0) + 1e-9
    # the increment is linear in the flows
    inc = lambda c, dd: soc_update(soc, c, dd, e, 1.0) - soc
    assert inc(c1 + c2, d) == pytest.approx(inc(c1, d) + inc(c2, 0.0), rel=1e-9, abs=1e-6)


@given(e_kwh=st.floats(0.1, 1000), eta=eff)
def test_round_trip_delivers_eta_squared(e_kwh, eta):
    start = 50.0
    charged = soc_update(start, e_kwh, 0.0, eta, 1.0)
    # discharge P such that SOC returns to start: P/eta = charged - start
    p = (charged - start) * eta
    assert soc_update(charged, 0.0, p, eta, 1.0) == pytest.approx(start, abs=1e-9)
    assert p == pytest.approx(e_kwh * eta ** 2, rel=1e-12)


@pytest.mark.parametrize("price, expected", [(0.088, 0.484), (0.21, 1.155), (0.0, 0.0)])
def test_gasoline_equivalent(price, expected):
    assert gasoline_equivalent(price, 24.2, 4.4) == pytest.approx(expected, abs=1e-12)


@given(p=st.floats(0, 10), s=st.floats(0, 100))
def test_gasoline_equivalent_homogeneous(p, s):
    assert gasoline_equivalent(s * p, 24.2, 4.4) == pytest.approx(
        s * gasoline_equivalent(p, 24.2, 4.4), rel=1e-12, abs=1e-15)


def test_gasoline_equivalent_rejects_zero_efficiency():
    with pytest.raises(DomainError):
        gasoline_equivalent(0.1, 24.2, 0.0)


def test_battery_from_rating_defaults():
    b = BatterySpec.from_rating(800.0)
    assert (b.soc_min, b.soc_max, b.soc_initial) == (320.0, 3200.0, 320.0)
    half = b.scaled(0.5)
    assert half.effective_power_cap == 400.0
    assert half.effective_soc_max == 1600.0


def test_validate_synthetic_instance_is_clean(synthetic):
    assert validate_instance(synthetic).violations == []


def test_validate_flags_unreachable_ev(synthetic):
    ev = replace(synthetic.ev_sessions[0], departure_period=6, name="late")
    inst = replace(synthetic, ev_sessions=(ev,) + synthetic.ev_sessions[1:])
    report = validate_instance(inst)
    assert not report.ok
    assert any("late" in v and "unreachable" in v for v in report.violations)


def test_validate_flags_length_mismatch(synthetic):
    ld = synthetic.loads
    short = LoadProfile(ld.residential[:-1], ld.commercial, ld.residential_common)
    report = validate_instance(replace(synthetic, loads=short))
    assert any("loads.residential" in v and "length mismatch" in v for v in report.violations)


def test_validate_collects_several_violations():
    inst = toy_instance(load=(10.0, -1.0))
    inst = replace(inst, battery=BatterySpec(10, 1.5, 5, 1, 2))
    report = validate_instance(inst)
    assert len(report.violations) >= 3
    assert not bool(report)


def test_validate_requires_departure_inside_horizon(synthetic):
    ev = EvSession(75, 11, 0.9, 20, 24, 0.5, 0.6)
    report = validate_instance(replace(synthetic, ev_sessions=(ev,)))
    assert any("departure" in v for v in report.violations)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 50))
def test_synthetic_instances_always_validate(seed, n):
    assert validate_instance(synth_instance(seed, n)).ok


def test_cost_report_total_and_order():
    r = CostReport(commercial=-1.0, residential=2.0, pv=0.5)
    assert r.as_tuple() == (-1.0, 2.0, 0.5, 0.0, 0.0, 0.0)
    assert r.total == 1.5


def test_schedule_zeros_balance_equals_negative_load():
    loads = LoadProfile([1, 2], [3, 4], [5, 6])
    res, com = Schedule.zeros(2).balance_residuals(loads)
    np.testing.assert_array_equal(res, [-1, -2])
    np.testing.assert_array_equal(com, [-8, -10])
    assert math.isnan(Schedule.zeros(2, n_ev=1).ev_soc[0, 0])
