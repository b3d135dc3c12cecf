import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from softbool.model import (ModelParams, Regime, degree_intensity_above, kernel, mark_to_edge_weight,
                            mark_to_radius, predict, profile, s_threshold, unit_ball_volume)

marks = st.floats(1e-6, 1 - 1e-6)


@pytest.mark.parametrize("d,expected", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)])
def test_unit_ball_volume(d, expected):
    assert unit_ball_volume(d) == pytest.approx(expected, rel=1e-14)


def test_unit_ball_volume_monte_carlo(rng):
    x = rng.uniform(-1, 1, size=(400_000, 3))
    est = 8 * np.mean((x**2).sum(axis=1) <= 1)
    assert abs(est - unit_ball_volume(3)) < 0.02


@pytest.mark.parametrize("x,expected", [(0.5, 1.0), (1.0, 1.0), (2.0, 0.25), (0.0, 1.0)])
def test_profile_examples(x, expected):
    assert profile(x, 2.0) == expected


@given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(1.01, 10))
def test_profile_monotone(x, y, delta):
    lo, hi = min(x, y), max(x, y)
    assert profile(hi, delta) <= profile(lo, delta) <= 1.0
    if hi <= 1.0:
        assert profile(hi, delta) == 1.0


@pytest.mark.parametrize("s,t,g,a,expected", [
    (0.25, 0.5, 0.5, 0.0, 0.5),
    (0.3, 0.3, 0.0, 0.0, 1.0),
    (0.25, 0.5, 0.5, 0.5, 0.25**0.5 * 0.5**0.5),
])
def test_kernel_examples(s, t, g, a, expected):
    assert kernel(s, t, g, a) == pytest.approx(expected, rel=1e-12)


@given(marks, marks, st.floats(0, 0.99), st.floats(0, 1.0))
def test_kernel_symmetric(s, t, g, a):
    assert kernel(s, t, g, a) == kernel(t, s, g, a)


def test_kernel_ordering_grid():
    s, t = np.meshgrid(np.linspace(0.005, 0.995, 100), np.linspace(0.005, 0.995, 100))
    for g, de in [(0.3, 2.0), (0.6, 1.5), (0.2, 4.0)]:
        k0 = kernel(s, t, g, 0.0)
        k1 = kernel(s, t, g, g / de)
        k2 = kernel(s, t, g, g)
        assert np.all(k0 >= k1) and np.all(k1 >= k2)


@pytest.mark.parametrize("u,g,expected", [(0.25, 0.5, 2.0), (0.3, 0.0, 1.0)])
def test_mark_to_radius(u, g, expected):
    assert mark_to_radius(u, g) == pytest.approx(expected)


@pytest.mark.parametrize("v,de,expected", [(0.25, 2.0, 2.0), (1 - 1e-15, 3.0, 1.0)])
def test_mark_to_edge_weight(v, de, expected):
    assert mark_to_edge_weight(v, de) == pytest.approx(expected)


def test_pareto_transforms_survival(rng):
    u = rng.random(10**6)
    n = len(u)
    for r in (1.5, 2.0, 3.0, 4.0, 8.0):
        p = r ** (-1 / 0.5)
        emp = np.mean(mark_to_radius(u, 0.5) > r)
        assert abs(emp - p) <= 3 * math.sqrt(p * (1 - p) / n)
    for w in (1.2, 1.5, 2.0, 3.0, 5.0):
        p = w**-2.0
        emp = np.mean(mark_to_edge_weight(u, 2.0) > w)
        assert abs(emp - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_predict_mixed_example():
    p = predict(ModelParams(0.05, 0.5, 0.0, 2.0, 1))
    assert p.regime == Regime.MIXED.value
    assert p.zeta == pytest.approx(1.0)
    assert p.diameter_exponent == pytest.approx(0.5, abs=1e-12)
    assert p.size_exponent is None and "size_boundary_gamma_half" in p.flags
    assert p.beta0 == pytest.approx(0.5 / 264, abs=1e-12)
    assert p.gamma_critical == pytest.approx(2 / 3)


def test_predict_long_range_example():
    p = predict(ModelParams(0.05, 0.2, 0.0, 3.0, 1))
    assert p.regime == Regime.LONG_RANGE_DOMINATED.value
    assert p.diameter_exponent == pytest.approx(2.0)
    assert p.size_exponent == pytest.approx(4.0)
    assert p.degree_tau == pytest.approx(6.0)


def test_predict_no_subcritical_phase():
    p = predict(ModelParams(0.05, 0.7, 0.0, 2.0, 2))
    assert p.regime == Regime.NO_SUBCRITICAL_PHASE.value
    assert p.diameter_exponent is None and p.beta0 is None


def test_predict_boundary_and_gamma_zero():
    p = predict(ModelParams(0.05, 1 / 3, 0.0, 2.0, 1))
    assert p.regime == Regime.BOUNDARY.value and "boundary_log_correction" in p.flags
    assert p.diameter_exponent == pytest.approx(1.0)
    q = predict(ModelParams(0.05, 0.0, 0.0, 2.0, 1))
    assert q.zeta is None and q.degree_tau is None


@given(st.floats(1.05, 6.0), st.floats(0.01, 0.99))
def test_regime_iii_identity(delta, frac):
    lo, hi = 1 / (delta + 1), delta / (delta + 1)
    g = lo + frac * (hi - lo)
    zeta = (delta - 1) / (g * delta)
    assert (delta - 1 + g) / (g * delta) - 1 == pytest.approx((1 - g) * zeta, abs=1e-12)


def test_predict_alpha_nonzero_marks_undefined():
    p = predict(ModelParams(0.05, 0.4, 0.2, 2.0, 1))
    assert p.diameter_exponent is None and p.size_exponent is None
    assert predict(ModelParams(0.05, 0.4, 0.4, 2.0, 1)).size_exponent == pytest.approx(1.5)


@pytest.mark.parametrize("bad", [
    dict(beta=0.0, gamma=0.3), dict(beta=0.1, gamma=1.0), dict(beta=0.1, gamma=0.3, delta=1.0),
    dict(beta=0.1, gamma=0.5, alpha=1.5), dict(beta=0.1, gamma=0.3, dim=0),
])
def test_params_validation(bad):
    with pytest.raises(ValueError):
        ModelParams(**bad)


@pytest.mark.parametrize("m,zeta,expected", [(100, 1.0, 0.01), (16, 0.75, 0.125)])
def test_s_threshold(m, zeta, expected):
    assert s_threshold(m, zeta) == pytest.approx(expected)


def test_s_threshold_domain():
    assert s_threshold(1 + 1e-12, 2.0) < 1.0
    with pytest.raises(ValueError):
        s_threshold(1.0, 1.0)


def test_degree_intensity_closed_form():
    p = ModelParams(0.1, 0.5, 0.0, 2.0, 2)
    assert degree_intensity_above(p, 0.25) == pytest.approx(0.3 * math.pi, rel=1e-12)
