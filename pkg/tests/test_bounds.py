from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vortwave import bounds as bd
from vortwave.bounds import AdverseCoefficients, BoundReport, RouteError
from vortwave.formulation import PhysicalParams
from vortwave.spectral import ParameterError, beta_eval

from conftest import G


def adverse(gamma=0.5, d=1.0, m=-3.0, Q=30.0):
    return PhysicalParams(g=G, d=d, gamma=gamma, m=m, Q=Q)


# ---------------------------------------------------------------------------
# favorable

@pytest.mark.parametrize("gamma,expected", [(-2.0, 2.0), (-20.0, math.sqrt(117.72) / 20), (0.0, 2.0)])
def test_favorable_examples(gamma, expected):
    assert bd.favorable_bound(G, 1.0, gamma) == pytest.approx(expected, rel=1e-14)


def test_favorable_example_digits():
    assert bd.favorable_bound(G, 1.0, -20.0) == pytest.approx(0.54249, abs=5e-6)
    assert bd.favorable_bound(G, 3.0, 0.0) == 6.0


def test_favorable_wrong_route():
    with pytest.raises(RouteError):
        bd.favorable_bound(G, 1.0, 0.1)
    with pytest.raises(ParameterError):
        bd.favorable_bound(G, 0.0, -1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 10.0), st.floats(0.0, 50.0), st.floats(1.0, 3.0))
def test_favorable_monotone(d, abs_gamma, factor):
    b = bd.favorable_bound(G, d, -abs_gamma)
    assert bd.favorable_bound(G, d, -abs_gamma * factor) <= b
    assert bd.favorable_bound(G, d * factor, -abs_gamma) >= b


def test_favorable_report_condition():
    rep = bd.favorable_report(G, 1.0, -2.0, amplitude=0.5)
    assert rep.applicable and rep.conditions[0].satisfied
    assert rep.conditions[0].margin == pytest.approx(0.75)


# ---------------------------------------------------------------------------
# coefficients

def test_DEF_closed_form():
    p = adverse()
    c = bd.adverse_DEF(p, 0.1, N=0.4)
    lam = 1 / p.d + 0.5
    b = beta_eval(math.pi / 2, p.d)
    assert c.D == pytest.approx(4 * 0.4 / (math.pi * lam))
    assert c.E == pytest.approx(3 / (2 * lam) + 3 * G * b / (2 * math.pi * 0.25 * lam))
    F = 3 * G / lam * (4.0 + 3.0 / (0.5 * G) + (900 / (4 * G * G) - 0.1) / (2 * G))
    assert c.F == pytest.approx(F, rel=1e-14)
    assert min(c.D, c.E, c.F) > 0


def test_E_F_scale_like_inverse_gamma_squared():
    ratios = []
    for gamma in (1e-2, 1e-3, 1e-4):
        e1 = bd.adverse_DEF(adverse(gamma=gamma), 0.0, 0.1)
        e2 = bd.adverse_DEF(adverse(gamma=gamma / 2), 0.0, 0.1)
        ratios.append((e2.E / e1.E, e2.F / e1.F))
    assert abs(ratios[-1][0] - 4) < 1e-3 and abs(ratios[-1][1] - 4) < 1e-3
    # convergence towards 4 as gamma -> 0
    assert abs(ratios[-1][0] - 4) < abs(ratios[0][0] - 4)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(0.2, 4.0), st.floats(0.0, 0.99), st.floats(0.0, 5.0))
def test_coefficient_monotonicity(gamma, d, frac, N):
    p = adverse(gamma=gamma, d=d)
    cap = p.Q**2 / (4 * G * G)
    lo = bd.adverse_DEF(p, frac * cap * 0.5, N)
    hi = bd.adverse_DEF(p, frac * cap, N + 0.1)
    assert hi.F <= lo.F
    assert hi.D > lo.D
    assert min(lo.D, lo.E, lo.F) >= 0 and lo.E > 0 and lo.F > 0


def test_coefficient_preconditions():
    with pytest.raises(RouteError):
        bd.adverse_DEF(adverse(gamma=-0.5), 0.0, 0.1)
    with pytest.raises(ParameterError):
        bd.adverse_DEF(adverse(), 100.0, 0.1)
    with pytest.raises(ParameterError):
        bd.adverse_DEF(adverse(), 0.0, -1.0)
    with pytest.raises(ValueError):
        AdverseCoefficients("sideways", 1.0, 1.0)


# ---------------------------------------------------------------------------
# quadratic route

def test_quadratic_example():
    rep = bd.adverse_quadratic_bound(AdverseCoefficients("slope_N", E=5.0, F=3.0, D=1.0))
    assert rep.applicable and rep.bound_value == pytest.approx(1.0, abs=1e-15)
    assert rep.extras["large_root"] == pytest.approx(3.0)


def test_quadratic_trivial_root():
    rep = bd.adverse_quadratic_bound(AdverseCoefficients("slope_N", E=5.0, F=0.0, D=1.0))
    assert rep.bound_value == 0.0


def test_quadratic_negative_discriminant():
    rep = bd.adverse_quadratic_bound(AdverseCoefficients("slope_N", E=5.0, F=4.0 + 1e-9, D=1.0))
    assert not rep.applicable and rep.bound_value is None
    bad = [c for c in rep.conditions if not c.satisfied]
    assert [c.name for c in bad] == ["4F_below_gap_squared"] and bad[0].margin < 0


def test_quadratic_D_above_E():
    rep = bd.adverse_quadratic_bound(AdverseCoefficients("slope_N", E=1.0, F=0.1, D=2.0))
    assert not rep.applicable and not rep.conditions[0].satisfied


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(0.1, 100.0), st.floats(0.0, 1.0))
def test_quadratic_root_is_root(D, gap, frac):
    F = frac * gap * gap / 4 * 0.999
    rep = bd.adverse_quadratic_bound(AdverseCoefficients("slope_N", E=D + gap, F=F, D=D))
    A = rep.bound_value
    assert abs(A * A - gap * A + F) <= 1e-12 * max(1.0, gap * gap)
    assert 0 <= A <= gap / 2 + 1e-12


# ---------------------------------------------------------------------------
# quartic route

def test_quartic_P_examples():
    c = AdverseCoefficients("convexity_M", E=2.0, F=1.0, D_M=0.0)
    assert bd.quartic_P(1.0, c) == 0.0
    c = AdverseCoefficients("convexity_M", E=3.0, F=0.7, D_M=0.4)
    assert bd.quartic_P(0.0, c) == 0.7
    h = 1e-4
    d1 = (bd.quartic_P(h, c) - bd.quartic_P(-h, c)) / (2 * h)
    d2 = (bd.quartic_P(h, c) - 2 * bd.quartic_P(0.0, c) + bd.quartic_P(-h, c)) / h**2
    assert abs(d1) < 1e-7
    assert d2 == pytest.approx(-6.0, rel=1e-6)
    with pytest.raises(ValueError):
        bd.quartic_P(1.0, AdverseCoefficients("slope_N", E=1.0, F=1.0, D=1.0))


def test_quartic_small_gamma_applies():
    p = adverse(gamma=0.01)
    rep = bd.adverse_quartic_bound(p, M=0.0, epsilon=0.1)
    c = bd.adverse_DEF_M(p, 0.0, 0.0)
    Y1 = math.sqrt(1.1 * c.F / c.E)
    assert rep.applicable
    assert rep.extras["P_Y1"] == pytest.approx(Y1**4 - 0.1 * c.F, rel=1e-10)
    assert rep.extras["envelope"] > rep.bound_value


def test_quartic_large_gamma_fails_with_margin():
    rep = bd.adverse_quartic_bound(adverse(gamma=50.0), M=50.0)
    assert not rep.applicable and rep.conditions[0].margin <= 0


def test_quartic_rejects_bad_epsilon():
    with pytest.raises(ParameterError):
        bd.adverse_quartic_bound(adverse(), 1.0, epsilon=0.0)


# ---------------------------------------------------------------------------
# smallness gates and the universal number

def test_smallness_all_hold_small_gamma():
    p = adverse(gamma=0.01)
    for rep in (bd.smallness_N(p, 0.3), bd.smallness_M(p, 0.3)):
        assert rep.applicable and rep.route == "universal_corollary"
        assert rep.bound_value == pytest.approx(12 * math.pi / beta_eval(math.pi / 2, 1.0))
        assert rep.bound_value < 104
        assert len(rep.conditions) == 4


def test_smallness_boundary_zero_margin():
    p = adverse(gamma=G * 1.0 / 3.0)  # gamma = g d / |m|
    rep = bd.smallness_N(p, 0.1)
    first = rep.conditions[0]
    assert not first.satisfied and first.margin == 0.0
    assert not rep.applicable and rep.bound_value is None


def test_smallness_M_zero_curvature():
    rep = bd.smallness_M(adverse(gamma=2.0), 0.0)
    assert rep.conditions[2].satisfied


@pytest.mark.parametrize("d", [0.01, 0.1, 0.5, 1.0, 10.0, 100.0])
def test_universal_number(d):
    rep = bd.universal_report(d)
    assert all(c.satisfied for c in rep.conditions)
    assert rep.bound_value < rep.extras["floor_bound"] < 103.76


def test_bound_report_invariant():
    with pytest.raises(ValueError):
        BoundReport("favorable", True, None)
    with pytest.raises(ValueError):
        BoundReport("teleport", False, None)
    d = BoundReport("favorable", True, 1.0).to_dict()
    assert d["bound_value"] == 1.0 and d["conditions"] == []


def test_evaluate_all_routes():
    assert [r.route for r in bd.evaluate_all(adverse(gamma=-1.0))] == ["favorable"]
    routes = [r.route for r in bd.evaluate_all(adverse(gamma=0.01), N=0.2, M=0.3)]
    assert routes == ["adverse_quadratic", "universal_corollary", "adverse_quartic",
                      "universal_corollary", "universal_corollary"]
