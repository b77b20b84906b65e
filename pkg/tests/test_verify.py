from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from vortwave import verify as vf
from vortwave.formulation import PhysicalParams, is_monotone_increasing
from vortwave.spectral import Grid, from_coeffs

from conftest import G, branch


PARAMS = PhysicalParams(g=G, d=1.0, gamma=-1.0, m=-2.0, Q=30.0)


# ---------------------------------------------------------------------------
# check semantics

@pytest.mark.parametrize("lhs,rel,rhs,ok", [
    (1.0, "<", 2.0, True), (2.0, "<", 2.0, False), (2.0, "<=", 2.0, True),
    (3.0, ">", 2.0, True), (2.0, ">=", 2.0, True), (1.0, ">=", 2.0, False),
])
def test_compare_relations(lhs, rel, rhs, ok):
    c = vf.compare("x", lhs, rel, rhs)
    assert c.passed is ok
    if lhs == rhs:
        assert c.margin == 0.0
    else:
        assert (c.margin > 0) is ok


def test_compare_equality_tolerance():
    assert vf.compare("e", 1.0, "==", 1.0 + 1e-12, tol=1e-10).status == "pass"
    assert vf.compare("e", 1.0, "==", 1.0 + 1e-8, tol=1e-10).status == "fail"
    with pytest.raises(ValueError):
        vf.compare("e", 1.0, "~", 1.0)


def test_compare_statuses():
    assert vf.compare("x", 1.0, "<", 0.0, degenerate=True).status == "degenerate-pass"
    assert vf.compare("x", 1.0, "<", 0.0, inconclusive=True).status == "inconclusive"
    assert vf.compare("x", math.nan, "<", 0.0).status == "fail"
    rep = vf.AuditReport("s", (vf.compare("x", 1.0, "<", 0.0, inconclusive=True), vf.skipped("y")))
    assert rep.overall and rep.inconclusive and rep.failures() == []


# ---------------------------------------------------------------------------
# kernel audits

@pytest.mark.parametrize("d", [0.01, 0.1, 1.0, 10.0, 100.0])
def test_kernel_audit_passes(d):
    rep = vf.audit_kernel(d)
    assert rep.overall, rep.failures()
    names = {c.name for c in rep.checks}
    assert {"beta_positive", "beta_strictly_decreasing", "beta_half_floor", "beta_prime_envelope"} <= names


def test_kernel_audit_custom_grid():
    rep = vf.audit_kernel(1.0, np.linspace(0.1, 3.0, 50))
    assert rep.overall


# ---------------------------------------------------------------------------
# random profiles

def test_random_profiles_are_admissible():
    fs = vf.random_profiles(50, seed=3)
    assert len(fs) == 50
    for f in fs:
        assert is_monotone_increasing(f)
        assert np.min(f.values) > 0
        assert np.allclose(f.sin_coeffs, 0)


def test_random_profiles_reproducible():
    a = vf.random_profiles(5, seed=9)
    b = vf.random_profiles(5, seed=9)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))


@pytest.mark.parametrize("d", [0.25, 1.0, 4.0])
def test_estimates_hold_on_random_profiles(d):
    params = PARAMS.replace(d=d)
    for f in vf.random_profiles(100, seed=int(d * 100)):
        for rep in vf.audit_synthetic(f, params, "p"):
            assert rep.overall and not rep.inconclusive, rep.failures()


def test_flat_profile_is_degenerate_pass():
    f = from_coeffs(Grid(32), [2.0])
    q = vf.audit_quadratic_lower(f, 1.0)
    assert q.checks[0].status in ("pass", "degenerate-pass")
    cub = vf.audit_cubic_upper(f, 1.0)
    assert [c.status for c in cub.checks] == ["degenerate-pass", "degenerate-pass"]


def test_non_monotone_profile_is_inconclusive_not_fail():
    # a bump in the middle of the half period breaks monotonicity
    f = from_coeffs(Grid(64), [2.0, -0.05, 0.0, 0.3])
    assert not is_monotone_increasing(f)
    reports = vf.audit_synthetic(f, PARAMS, "bad")
    assert all(rep.overall for rep in reports)
    assert any(rep.inconclusive for rep in reports)


def test_identities_exact_even_off_solutions(rng):
    f = vf.random_admissible_profile(rng)
    rep = vf.audit_decomposition_profile(PARAMS.replace(gamma=-3.0), f)
    ids = [c for c in rep.checks if c.name.endswith("identity")]
    assert len(ids) == 4 and all(c.status == "pass" for c in ids)


# ---------------------------------------------------------------------------
# solutions

@pytest.mark.parametrize("gamma", [-1.0, 0.0, 0.01])
def test_branch_points_audit_clean(gamma):
    res = branch(gamma, 1.0)
    for pt in res.points[1::4]:
        for rep in vf.audit_point(pt.params, pt):
            assert rep.overall, rep.failures()


def test_adverse_branch_skips_favorable_only_checks():
    pt = branch(0.01, 1.0).points[5]
    rep = vf.audit_decomposition(pt.params, pt)
    status = {c.name: c.status for c in rep.checks}
    assert status["L_below_A"] == "skipped" and status["psi_y_nonpositive"] == "skipped"
    chain = {c.name for c in vf.audit_crest_trough(pt.params, pt).checks}
    assert {"chain_quadratic_estimate", "chain_divided", "quadratic_inequality"} <= chain


def test_crest_trough_audit_rejects_non_solution():
    pt = branch(-1.0, 1.0).points[10]
    wrong = pt.params.replace(Q=pt.params.Q * 1.01)
    rep = vf.audit_crest_trough(wrong, pt)
    assert not rep.overall


# ---------------------------------------------------------------------------
# output

def test_csv_and_json_output(tmp_path):
    reports = [vf.audit_kernel(1.0, 50)]
    path = tmp_path / "a.csv"
    vf.write_audit_csv(reports, path, ["run x"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# run x"
    rows = list(csv.DictReader(lines[1:]))
    assert tuple(rows[0]) == vf.AUDIT_COLUMNS
    assert len(rows) == len(reports[0].checks)
    data = json.loads(vf.reports_to_json(reports))
    assert data[0]["overall"] is True and data[0]["checks"][0]["passed"] is True
