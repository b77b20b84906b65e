from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vortwave import spectral as sp
from vortwave.spectral import Grid, ParameterError, SingularityError

from conftest import random_trig


def coth(x):
    return 1.0 / math.tanh(x)


def trapezoid_cos(values, k):
    n = len(values)
    x = 2 * np.pi * np.arange(n) / n
    w = 1.0 if k == 0 else 2.0
    return w * float(np.mean(values * np.cos(k * x)))


# ---------------------------------------------------------------------------
# grid and profiles

@pytest.mark.parametrize("n", [0, 8, 15, 17, -16])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ParameterError):
        Grid(n)


def test_grid_nodes_and_trough():
    g = Grid(32)
    assert g.nodes[0] == 0.0
    assert g.nodes[g.trough_index] == pytest.approx(math.pi, abs=0)
    assert np.allclose(np.diff(g.nodes), 2 * math.pi / 32, rtol=0, atol=1e-15)


def test_analyze_constant():
    p = sp.analyze(np.full(32, 3.0))
    assert p.cos_coeffs[0] == pytest.approx(3.0, abs=1e-15)
    assert np.max(np.abs(p.cos_coeffs[1:])) < 1e-15
    assert p.mean == p.cos_coeffs[0]


def test_analyze_pure_mode():
    x = Grid(32).nodes
    p = sp.analyze(np.cos(2 * x))
    expect = np.zeros(17)
    expect[2] = 1.0
    assert np.allclose(p.cos_coeffs, expect, atol=1e-15)


def test_analyze_against_trapezoid_integrals():
    x = Grid(32).nodes
    v = np.cos(x) + 0.5 * np.cos(3 * x)
    p = sp.analyze(v)
    for k in range(17):
        oracle = trapezoid_cos(v, k) if k < 16 else float(np.mean(v * np.cos(k * x)))
        assert p.cos_coeffs[k] == pytest.approx(oracle, abs=1e-14)
    assert p.cos_coeffs[1] == pytest.approx(1.0) and p.cos_coeffs[3] == pytest.approx(0.5)


def test_analyze_length_mismatch():
    with pytest.raises(ParameterError):
        sp.analyze(np.zeros(30), Grid(32))


def test_even_parity_has_no_sines():
    x = Grid(64).nodes
    p = sp.analyze(np.cos(x) + np.cos(5 * x) ** 2)
    assert p.parity == "even"
    assert not np.any(p.sin_coeffs)
    n = 64
    assert np.allclose(p.values[1:], p.values[1:][::-1], atol=1e-14)
    assert all(p.values[j] == pytest.approx(p.values[n - j], abs=1e-14) for j in range(1, n))


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.sampled_from([16, 32, 128]))
def test_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    a, b = random_trig(rng, n, n // 2 - 1, zero_mean=False)
    p = sp.from_coeffs(Grid(n), a, b)
    q = sp.analyze(p.values)
    scale = max(1.0, float(np.max(np.abs(a))))
    assert np.max(np.abs(q.cos_coeffs - p.cos_coeffs)) <= 1e-12 * scale
    assert np.max(np.abs(q.sin_coeffs - p.sin_coeffs)) <= 1e-12 * scale
    assert np.max(np.abs(sp.synthesize(q.cos_coeffs, q.sin_coeffs, n) - p.values)) <= 1e-12 * scale


def test_evaluate_matches_nodes_and_offgrid():
    x = Grid(32).nodes
    p = sp.analyze(np.cos(x) + 0.25 * np.sin(3 * x))
    assert np.allclose(sp.evaluate(p, x), p.values, atol=1e-14)
    assert sp.evaluate(p, 0.3) == pytest.approx(math.cos(0.3) + 0.25 * math.sin(0.9), abs=1e-14)


def test_resample_preserves_function():
    x = Grid(32).nodes
    p = sp.analyze(np.cos(x) - 0.3 * np.cos(4 * x))
    q = sp.resample(p, 128)
    xx = Grid(128).nodes
    assert np.allclose(q.values, np.cos(xx) - 0.3 * np.cos(4 * xx), atol=1e-14)


def test_multiply_is_exact_for_resolved_product():
    x = Grid(32).nodes
    p = sp.analyze(np.cos(5 * x))
    q = sp.analyze(np.cos(7 * x))
    r = sp.multiply(p, q)
    assert np.allclose(r.values, np.cos(5 * x) * np.cos(7 * x), atol=1e-14)


# ---------------------------------------------------------------------------
# hilbert and friends

def test_hilbert_cos_x():
    x = Grid(32).nodes
    h = sp.hilbert(sp.analyze(np.cos(x)), 1.0)
    assert h.sin_coeffs[1] == pytest.approx(coth(1.0), rel=1e-14)
    assert h.sin_coeffs[1] == pytest.approx(1.313035, abs=5e-7)
    assert np.allclose(h.values, coth(1.0) * np.sin(x), atol=1e-14)


def test_hilbert_constant_is_zero_and_flagged():
    h = sp.hilbert(sp.analyze(np.full(32, 2.5)), 1.0)
    assert np.max(np.abs(h.values)) == 0.0
    assert h.mean_dropped


def test_hilbert_sin_2x():
    x = Grid(32).nodes
    h = sp.hilbert(sp.analyze(np.sin(2 * x)), 0.5)
    assert np.allclose(h.values, -coth(1.0) * np.cos(2 * x), atol=1e-14)
    assert not h.mean_dropped


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_hilbert_rejects_depth(d):
    with pytest.raises(ParameterError):
        sp.hilbert(sp.analyze(np.zeros(16)), d)


@pytest.mark.parametrize("d", [0.1, 1.0, 10.0])
def test_hilbert_is_skew(rng, d):
    n = 64
    f = sp.from_coeffs(Grid(n), *random_trig(rng, n, 20))
    g = sp.from_coeffs(Grid(n), *random_trig(rng, n, 20))
    lhs = float(np.mean(sp.hilbert(f, d).values * g.values))
    rhs = -float(np.mean(f.values * sp.hilbert(g, d).values))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_coth_multiplier_monotone_to_one():
    for d in (0.05, 0.5, 5.0):
        full = sp.coth_multiplier(256, d)
        assert full[-1] == 0.0  # Nyquist mode is dropped for odd-order operators
        m = full[1:-1]
        assert np.all(m >= 1.0)
        assert np.all(np.diff(m) <= 0.0)
    assert sp.coth_multiplier(256, 5.0)[-2] == 1.0


@pytest.mark.parametrize("n_mode,d", [(1, 1.0), (3, 0.2), (7, 2.0)])
def test_hilbert_prime_mode_map(n_mode, d):
    x = Grid(64).nodes
    hp = sp.hilbert_prime(sp.analyze(np.cos(n_mode * x)), d)
    assert np.allclose(hp.values, n_mode * coth(n_mode * d) * np.cos(n_mode * x), atol=1e-13)


def test_hilbert_prime_constant():
    assert np.max(np.abs(sp.hilbert_prime(sp.analyze(np.full(16, 4.0)), 1.0).values)) == 0.0


def test_hilbert_prime_both_orders(rng):
    n = 64
    a, _ = random_trig(rng, n, n // 2 - 1, even=True, zero_mean=False)
    p = sp.from_coeffs(Grid(n), a)
    d = 0.7
    hp = sp.hilbert_prime(p, d).values
    one = sp.hilbert(sp.differentiate(p), d).values
    two = sp.differentiate(sp.hilbert(p, d)).values
    scale = max(1.0, float(np.max(np.abs(hp))))
    assert np.max(np.abs(one - two)) <= 1e-12 * scale
    assert np.max(np.abs(one - hp)) <= 1e-12 * scale


def test_dirichlet_G_constant():
    g = sp.dirichlet_G(sp.analyze(np.ones(16)), 2.0)
    assert np.allclose(g.values, 0.5, atol=1e-15)


def test_dirichlet_G_mode():
    x = Grid(32).nodes
    g = sp.dirichlet_G(sp.analyze(np.cos(3 * x)), 2.0)
    assert np.allclose(g.values, 3 * coth(6.0) * np.cos(3 * x), atol=1e-13)


def test_dirichlet_G_hopf_example():
    x = Grid(64).nodes
    phi = sp.analyze(-(1 - np.cos(x)) ** 2)
    assert sp.dirichlet_G(phi, 1.0).values[0] > 0.0


@pytest.mark.parametrize("d", [0.2, 1.0, 5.0])
def test_dirichlet_G_hopf_randomized(d):
    """Unique maximum 0 at a random node gives G phi > 0 there."""
    rng = np.random.default_rng(11)
    n = 64
    for _ in range(200):
        K = int(rng.integers(1, 9))
        c = rng.uniform(-1, 1, K) * 0.6 ** np.arange(K)
        c[0] = abs(c[0]) + 0.1
        x = Grid(n).nodes
        f = np.sum(c[:, None] * (1 - np.cos(np.outer(np.arange(1, K + 1), x))), axis=0)
        if np.count_nonzero(f <= 1e-12) > 1 or np.any(f < 0):
            continue  # maximum of -f not unique
        j = int(rng.integers(0, n))
        phi = sp.analyze(np.roll(-f, j))
        assert np.argmax(phi.values) == j
        assert sp.dirichlet_G(phi, d).values[j] > 0.0


# ---------------------------------------------------------------------------
# kernel

@pytest.mark.parametrize("d", [0.1, 1.0, 10.0])
def test_beta_half_exceeds_floor(d):
    assert sp.beta_eval(math.pi / 2, d) > 0.363


@pytest.mark.parametrize("d", [0.01, 0.3, 1.0, 4.0, 100.0])
def test_beta_odd_and_derivative_even(d):
    s = np.linspace(0.05, 6.2, 60)
    assert np.allclose(sp.beta_eval(-s, d), -sp.beta_eval(s, d), rtol=1e-13, atol=1e-12)
    assert np.allclose(sp.beta_prime_eval(-s, d), sp.beta_prime_eval(s, d), rtol=1e-13)


@pytest.mark.parametrize("d", [0.1, 1.0, 10.0])
def test_beta_pole(d):
    for s in (1e-3, 1e-4):
        assert s * sp.beta_eval(s, d) == pytest.approx(2.0, abs=5 * s * s / d + 5 * s)


def test_beta_prime_matches_finite_difference():
    h = 1e-5
    fd = (sp.beta_eval(1 + h, 1.0) - sp.beta_eval(1 - h, 1.0)) / (2 * h)
    assert sp.beta_prime_eval(1.0, 1.0) == pytest.approx(fd, abs=1e-6)


def test_beta_closed_form_deep_and_shallow():
    # deep water: the strip kernel tends to the circle kernel cot(s/2)
    for s in (0.3, 1.0, 2.5):
        assert sp.beta_eval(s, 40.0) == pytest.approx(1 / math.tan(s / 2), rel=1e-12)
    # shallow water: beta ~ (π - s)/d on (0, 2π) away from the pole
    d = 0.01
    assert sp.beta_eval(1.0, d) * d == pytest.approx(math.pi - 1.0, rel=1e-12)


@pytest.mark.parametrize("s", [0.0, 2 * math.pi, -4 * math.pi])
def test_beta_singular(s):
    with pytest.raises(SingularityError):
        sp.beta_eval(s, 1.0)
    with pytest.raises(SingularityError):
        sp.beta_prime_eval(s, 1.0)


@pytest.mark.parametrize("d", [0.1, 1.0, 10.0])
def test_beta_strictly_decreasing(d):
    s = np.linspace(0, 2 * math.pi, 1002)[1:-1]
    assert np.all(np.diff(sp.beta_eval(s, d)) < 0)


@pytest.mark.parametrize("d", [0.01, 0.1, 1.0, 10.0, 100.0])
def test_beta_prime_envelope(d):
    s = np.concatenate([np.linspace(-math.pi, 0, 500, endpoint=False), np.linspace(0, math.pi, 501)[1:]])
    assert np.all(-sp.beta_prime_eval(s, d) < 1 / d + 2 / s**2 + 0.5)


def test_series_metadata():
    r = sp.beta_series(np.linspace(0.1, 3, 20), 1.0, 1e-14)
    assert r.terms >= 1
    assert r.tail_bound < 1e-14 * np.max(np.abs(r.value))


# ---------------------------------------------------------------------------
# kernel tables

def test_kernel_table_invariants_and_csv(tmp_path):
    s = np.linspace(0.01, 6.27, 300)
    t = sp.kernel_table(0.8, s)
    assert t.tail_bound < 1e-12 * np.max(np.abs(t.beta))
    assert np.all(np.diff(t.beta) < 0)
    assert len(t.samples) == 300
    path = tmp_path / "k.csv"
    sp.write_kernel_csv(t, path, ["depth 0.8"])
    back = sp.read_kernel_csv(path, 0.8)
    assert np.array_equal(back.s, t.s)
    assert np.array_equal(back.beta, t.beta)
    assert np.array_equal(back.beta_prime, t.beta_prime)
    header = path.read_text().splitlines()[1]
    assert header == "s,beta,beta_prime,truncation_terms,tail_bound"


# ---------------------------------------------------------------------------
# principal-value route

def test_pv_cos_x():
    x = Grid(32).nodes
    out = sp.pv_convolve(sp.analyze(np.cos(x)), 1.0)
    assert np.max(np.abs(out.values - coth(1.0) * np.sin(x))) < 1e-8


def test_pv_zero():
    assert np.max(np.abs(sp.pv_convolve(sp.analyze(np.zeros(16)), 1.0).values)) == 0.0


def test_pv_random_even_profile(rng):
    n = 32
    a = np.zeros(17)
    a[1:9] = rng.normal(size=8)
    p = sp.from_coeffs(Grid(n), a)
    assert np.max(np.abs(sp.pv_convolve(p, 0.7).values - sp.hilbert(p, 0.7).values)) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.sampled_from([0.1, 0.5, 1.0, 10.0]))
def test_pv_matches_hilbert_property(seed, d):
    rng = np.random.default_rng(seed)
    n = 64
    p = sp.from_coeffs(Grid(n), *random_trig(rng, n, n // 4))
    diff = sp.pv_convolve(p, d).values - sp.hilbert(p, d).values
    assert np.max(np.abs(diff)) < 1e-8
