import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from drcc_ems.core import DomainError, PvSampleSet
from drcc_ems.wasserstein import (AmbiguitySpec, c_value, dual_norm, estimate_c, radius,
                                  sample_norm, squared_deviations, wasserstein_1d)

from oracles import c_bound_direct, transport_w1

# frozen from c_bound_direct([0, 2], 0.5): d = 1, mean exp(0.5) = e^0.5
TWO_SAMPLE_C = 2.449489742783178


def test_radius_at_reference_constant():
    # 1.36 * sqrt(ln(1/0.95)/365), evaluated by hand
    assert radius(1.36, 365, 0.05) == pytest.approx(0.016123, abs=1e-6)


def test_radius_degenerate_cases():
    assert radius(0.0, 100, 0.5) == 0.0
    assert radius(3.0, 10, 1e-12) == pytest.approx(0.0, abs=1e-5)
    assert radius(2.0, 1, 0.05) == 2.0 * math.sqrt(math.log(1 / 0.95))


@pytest.mark.parametrize("args", [(1, 0, 0.05), (1, 10, 0.0), (1, 10, 1.0), (-1, 10, 0.5)])
def test_radius_domain(args):
    with pytest.raises(DomainError):
        radius(*args)


@given(c=st.floats(0.01, 10), n=st.integers(1, 10_000), beta=st.floats(0.001, 0.9))
def test_radius_monotonicity(c, n, beta):
    r = radius(c, n, beta)
    assert radius(c, n + 1, beta) < r
    assert radius(c, n, min(0.95, beta * 1.05)) > r
    assert radius(c * 1.1, n, beta) > r


def test_ambiguity_effective_radius():
    amb = AmbiguitySpec(1.36, 0.05, 0.05, "inf", 365)
    assert amb.effective_radius == pytest.approx(amb.radius / 0.05, rel=1e-15)
    assert amb.effective_radius_kw == pytest.approx(amb.effective_radius * 1000, rel=1e-15)
    with pytest.raises(DomainError):
        AmbiguitySpec(risk_alpha=0.0)
    with pytest.raises(DomainError):
        AmbiguitySpec(norm_kind="max")


@pytest.mark.parametrize("v, norm, expected", [
    ([3, -4], "two", 5.0), ([3, -4], "inf", 7.0), ([3, -4], "one", 4.0),
    ([0, 0, 0], "inf", 0.0), ([0, 0], "two", 0.0),
])
def test_dual_norm_examples(v, norm, expected):
    assert dual_norm(v, norm) == expected


vec = arrays(float, 6, elements=st.floats(-100, 100))


@given(v=vec, w=vec, norm=st.sampled_from(["one", "two", "inf"]))
def test_holder(v, w, norm):
    primal = sample_norm(w, norm)[0]
    assert dual_norm(v, norm) * primal >= float(v @ w) - 1e-9 * (1 + abs(float(v @ w)))


def test_c_hand_case_against_direct_oracle():
    direct = c_bound_direct([[0.0], [2.0]], 0.5)
    assert direct == pytest.approx(TWO_SAMPLE_C, abs=1e-12)
    est = estimate_c([[0.0], [2.0]], eta_grid=[0.5], scale=1.0)
    assert est.c == pytest.approx(TWO_SAMPLE_C, abs=1e-12)
    assert est.curve[0, 1] == pytest.approx(TWO_SAMPLE_C, abs=1e-12)


@settings(max_examples=30)
@given(xi=arrays(float, (5, 3), elements=st.floats(0, 3)), eta=st.floats(0.01, 5))
def test_logsumexp_matches_direct_form(xi, eta):
    d2 = squared_deviations(xi, "inf", scale=1.0)
    assert c_value(d2, eta) == pytest.approx(c_bound_direct(xi, eta), rel=1e-10)


def test_identical_samples_pick_grid_end():
    est = estimate_c(np.full((10, 4), 700.0))
    assert est.eta_star == pytest.approx(10.0)
    assert est.c == pytest.approx(2 * math.sqrt(1 / 20), rel=1e-12)


def test_kw_scale_does_not_overflow():
    xi = np.array([[0.0, 0.0], [1540.0, 1900.0]])
    est = estimate_c(xi)
    assert math.isfinite(est.c) and est.c > 0


@settings(max_examples=40, deadline=None)
@given(xi=arrays(float, (6, 2), elements=st.floats(0, 2000)),
       perm=st.permutations(range(6)))
def test_estimate_c_order_invariant(xi, perm):
    a = estimate_c(xi)
    b = estimate_c(xi[list(perm)])
    assert b.c == pytest.approx(a.c, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(xi=arrays(float, (6, 2), elements=st.floats(0, 2000)), s=st.floats(1, 5))
def test_estimate_c_scaling_never_decreases(xi, s):
    assume(np.ptp(xi) > 1.0)
    assert estimate_c(xi * s).c >= estimate_c(xi).c * (1 - 1e-9)


def test_curve_on_synthetic_falls_then_flattens(synthetic):
    est = estimate_c(synthetic.pv_samples)
    eta, vals = est.curve[:, 0], est.curve[:, 1]
    k = int(np.argmin(vals))
    assert np.all(np.diff(vals[:k + 1]) <= 1e-12)
    assert vals[0] > 10 * vals.min()
    tail = vals[eta >= 5.0]
    assert tail.max() / tail.min() < 1.1
    assert est.c <= vals.min() + 1e-12
    assert est.c > 0


def test_estimate_c_accepts_sample_set():
    pv = PvSampleSet([[1000.0, 0.0], [1200.0, 10.0], [800.0, 5.0]])
    assert estimate_c(pv).c == estimate_c(pv.samples).c
    with pytest.raises(DomainError):
        estimate_c(pv, eta_grid=[])


@pytest.mark.parametrize("p, q, expected", [
    ([1, 2, 3], [1, 2, 3], 0.0), ([0, 0], [1, 1], 1.0), ([0, 2], [1, 3], 1.0),
])
def test_w1_examples(p, q, expected):
    assert wasserstein_1d(p, q) == expected
    assert transport_w1(p, q) == pytest.approx(expected, abs=1e-9)


def test_w1_matches_transport_lp():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(1, 8))
        p, q = rng.normal(0, 3, n), rng.normal(1, 2, n)
        assert wasserstein_1d(p, q) == pytest.approx(transport_w1(p, q), abs=1e-9)


samples3 = arrays(float, 5, elements=st.floats(-1e3, 1e3))


@given(a=samples3, b=samples3, c=samples3)
def test_w1_is_a_metric(a, b, c):
    assert wasserstein_1d(a, b) == wasserstein_1d(b, a)
    assert wasserstein_1d(a, a) == 0.0
    assert wasserstein_1d(a, c) <= wasserstein_1d(a, b) + wasserstein_1d(b, c) + 1e-9


def test_w1_rejects_unequal_counts():
    with pytest.raises(DomainError):
        wasserstein_1d([0, 1], [0])
