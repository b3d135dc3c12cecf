import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from softbool.estimate import (BracketTooWide, FitRefused, InsufficientTail, Statistic, SurvivalCurve,
                               cluster_batch, degree_batch, expected_origin_degree, exponential_samples,
                               fit_tail, make_grid, pareto_samples, run_cluster_experiment,
                               run_degree_experiment, run_diameter_experiment,
                               run_powerful_event_experiment, run_size_experiment,
                               second_hop_probability)
from softbool.graph import BoxTooSmallWarning
from softbool.model import ModelParams

MIXED = ModelParams(0.05, 0.5, 0.0, 2.0, 1)


def test_grid():
    g = make_grid(4.0, 2**0.25, 100.0)
    assert g[0] == 4.0 and g[-1] >= 100.0
    assert np.allclose(g[1:] / g[:-1], 2**0.25)


@pytest.mark.parametrize("method", ["LogLogOLS", "Hill"])
def test_pareto_recovered(method):
    c = SurvivalCurve.from_samples(pareto_samples(1.5, 10**6, seed=1, scale=4.0))
    f = fit_tail(c, (4.0, 400.0), method=method)
    assert abs(f.exponent - 1.5) < 0.05
    assert abs(f.cross_check["exponent"] - 1.5) < 0.05
    assert f.stderr < 0.05 and f.method == method
    assert "methods_disagree" not in f.warnings


@pytest.mark.parametrize("values", [np.full(10**4, 2.0), np.full(10**4, 100.0)])
def test_constant_refused(values):
    with pytest.raises(InsufficientTail):
        fit_tail(SurvivalCurve.from_samples(values))


def test_zero_trials_refused():
    c = SurvivalCurve.from_samples(np.zeros(0))
    assert c.trials == 0
    with pytest.raises(InsufficientTail):
        fit_tail(c)


def test_too_few_events_refused():
    with pytest.raises(InsufficientTail):
        fit_tail(SurvivalCurve.from_samples(pareto_samples(1.0, 100, scale=4.0)), (10, 40))


def test_exponential_flagged():
    c = SurvivalCurve.from_samples(exponential_samples(10**6, scale=20.0, seed=2))
    f = fit_tail(c, (10.0, 200.0))
    assert "non_power_law" in f.warnings


def test_pareto_not_flagged():
    c = SurvivalCurve.from_samples(pareto_samples(1.0, 10**6, seed=3, scale=4.0))
    assert "non_power_law" not in fit_tail(c, (10.0, 1000.0)).warnings


def test_bracket_checks():
    x = pareto_samples(1.0, 10**5, seed=4, scale=4.0)
    cens = np.zeros(len(x), bool)
    cens[:5000] = True
    x[:5000] = 20.0
    c = SurvivalCurve.from_samples(x, censored=cens)
    assert np.all(c.upper_counts >= c.lower_counts)
    with pytest.raises(BracketTooWide):
        fit_tail(c, (16.0, 200.0))
    c2 = SurvivalCurve.from_samples(pareto_samples(1.0, 10**5, seed=4, scale=4.0), safe_max=500.0)
    with pytest.raises(BracketTooWide):
        fit_tail(c2, (16.0, 1000.0))
    assert fit_tail(c2).window == (16.0, 125.0)


@given(st.lists(st.floats(0.0, 1e4), max_size=300), st.integers(0, 2**32))
def test_curve_invariants(values, seed):
    rng = np.random.default_rng(seed)
    cens = rng.random(len(values)) < 0.1
    c = SurvivalCurve.from_samples(values, censored=cens)
    assert np.all(np.diff(c.lower_counts) <= 0) and np.all(np.diff(c.upper_counts) <= 0)
    assert np.all(c.lower_counts <= c.upper_counts)
    assert c.trials == len(values)


@given(st.lists(st.floats(0.0, 1e3), max_size=100), st.lists(st.floats(0.0, 1e3), max_size=100))
def test_merge_is_concatenation(a, b):
    ca, cb = SurvivalCurve.from_samples(a), SurvivalCurve.from_samples(b)
    m = ca.merge(cb)
    whole = SurvivalCurve.from_samples(a + b)
    n = min(len(m.grid), len(whole.grid))
    assert np.array_equal(m.lower_counts[:n], whole.lower_counts[:n])
    assert m.trials == whole.trials


def test_csv_roundtrip(tmp_path):
    c = SurvivalCurve.from_samples(pareto_samples(1.0, 1000, seed=5, scale=3.0), Statistic.SIZE)
    c.samples_to_csv(tmp_path / "s.csv")
    back = SurvivalCurve.from_samples_csv(tmp_path / "s.csv", Statistic.SIZE, c.trials)
    assert np.array_equal(back.tail_values, c.tail_values)
    c.to_csv(tmp_path / "c.csv")
    head = (tmp_path / "c.csv").read_text().splitlines()
    assert head[0] == "m,upper_survival,lower_survival,events" and len(head) == len(c.grid) + 1


def test_experiment_determinism_and_workers():
    p = ModelParams(0.2, 0.4, 0.0, 2.0, 1)
    a = run_cluster_experiment(p, 400.0, 40000, seed=9, workers=1)
    b = run_cluster_experiment(p, 400.0, 40000, seed=9, workers=2)
    for x, y in zip(a, b):
        assert np.array_equal(x.tail_values, y.tail_values)
        assert np.array_equal(x.upper_counts, y.upper_counts)
    c = run_cluster_experiment(p, 400.0, 40000, seed=10, workers=1)
    assert not np.array_equal(a[1].tail_values, c[1].tail_values)


def test_batches_split_consistently():
    p = ModelParams(0.2, 0.4, 0.0, 2.0, 1)
    whole = cluster_batch(p, 300.0, 4, 0, 2000)
    parts = [cluster_batch(p, 300.0, 4, s, 500) for s in (0, 500, 1000, 1500)]
    assert np.array_equal(whole.size, np.concatenate([q.size for q in parts]))


def test_soft_boolean_below_scale_free():
    g = 0.4
    soft = cluster_batch(ModelParams(0.05, g, 0.0, 2.0, 1), 3000.0, 12, 0, 20000)
    sfp = cluster_batch(ModelParams(0.05, g, g, 2.0, 1), 3000.0, 12, 0, 20000)
    ok = ~(soft.censored | sfp.censored)
    assert np.all(soft.size[ok] <= sfp.size[ok])
    assert ok.mean() > 0.99


def test_beta_zero_size_curve():
    s = run_size_experiment(ModelParams(1e-12, 0.4, 0.0, 2.0, 1), 200.0, 2000, seed=1)
    assert s.lower_counts.sum() == 0 and s.trials == 2000


def test_diameter_requires_prediction():
    with pytest.raises(ValueError):
        run_diameter_experiment(ModelParams(0.05, 0.7, 0.0, 2.0, 1), 200.0, 10)
    run_diameter_experiment(ModelParams(0.05, 0.7, 0.0, 2.0, 1), 200.0, 10, force=True)


def test_diameter_zero_trials():
    c = run_diameter_experiment(MIXED, 400.0, 0)
    with pytest.raises(FitRefused):
        fit_tail(c)


def test_mean_degree_matches_box_integral():
    p = ModelParams(0.3, 0.3, 0.0, 2.0, 1)
    L, n = 500.0, 20000
    deg, _ = degree_batch(p, L, 3, 0, n)
    exact = expected_origin_degree(p, L)
    assert abs(deg.mean() - exact) < 3 * deg.std() / math.sqrt(n)


def test_mean_degree_2d():
    p = ModelParams(0.2, 0.3, 0.0, 2.0, 2)
    L, n = 12.0, 20000
    deg, _ = degree_batch(p, L, 5, 0, n, origin_mark=0.3)
    exact = expected_origin_degree(p, L, 0.3)
    assert abs(deg.mean() - exact) < 3 * deg.std() / math.sqrt(n)


def test_degree_warning_and_light_tail():
    p = ModelParams(0.3, 0.0, 0.0, 2.0, 1)
    with pytest.warns(BoxTooSmallWarning):
        run_degree_experiment(p, 3.0, 10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoxTooSmallWarning)
        c = run_degree_experiment(p, 2000.0, 20000, seed=2)
    with pytest.raises(FitRefused):
        fit_tail(c)


def test_powerful_event_slope():
    ms = [100 * 2 ** (k / 2) for k in range(14)]
    e = run_powerful_event_experiment(MIXED, 4e4, 20000, ms, seed=3)
    assert np.all(np.diff(e.hits) <= 0) and np.all(e.frequency <= 1)
    assert e.predicted_slope == pytest.approx(0.5)
    assert abs(e.fit.exponent - 0.5) < 0.1
    lo, hi = e.ci
    assert np.all((lo <= e.frequency) & (e.frequency <= hi))


def test_powerful_event_below_diameter():
    ms = [100.0, 400.0, 1600.0]
    n = 20000
    e = run_powerful_event_experiment(MIXED, 4e4, n, ms, seed=4)
    d = run_diameter_experiment(MIXED, 4e4, n, seed=4)
    for m, h in zip(ms, e.hits):
        q = second_hop_probability(MIXED, m)
        s1 = h / n * q
        s2 = float(np.sum(d.tail_values > m)) / n
        se = math.sqrt(s1 * (1 - s1) / n + s2 * (1 - s2) / n)
        assert 0 < q < 1
        assert s1 <= s2 + 3 * se


def test_event_requires_mixed():
    with pytest.raises(ValueError):
        run_powerful_event_experiment(ModelParams(0.05, 0.2, 0.0, 3.0, 1), 1e3, 10, [10.0])


def test_window_beyond_data_counts_empty_points():
    c = SurvivalCurve.from_samples(pareto_samples(1.0, 10**5, seed=6, scale=4.0))
    top = c.tail_values.max()
    with pytest.raises(InsufficientTail, match="without events"):
        fit_tail(c, (10.0, 4 * top))
    lower, upper = c.counts_at([top, 2 * top])
    assert lower.tolist() == [0, 0] and upper.tolist() == [0, 0]
