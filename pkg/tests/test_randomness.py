import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from softbool.randomness import Purpose, SeedContext, pair_uniform, stream_uniform, stream_uniforms

seeds = st.integers(0, 2**63 - 1)


@given(seeds, st.integers(0, 2**40), st.integers(0, 2**40))
def test_stream_deterministic_and_open(seed, trial, counter):
    ctx = SeedContext(seed, trial)
    a = stream_uniform(ctx, Purpose.MARK, counter)
    assert a == stream_uniform(SeedContext(seed, trial), Purpose.MARK, counter)
    assert 0.0 < a < 1.0


def test_stream_uniformity():
    x = stream_uniforms(SeedContext(7, 0), Purpose.USER, 0, 10**6)
    assert abs(x.mean() - 0.5) < 0.002
    assert stats.kstest(x, "uniform").statistic < 0.002


def test_trials_independent():
    a = stream_uniforms(SeedContext(7, 3), Purpose.USER, 0, 10**5)
    b = stream_uniforms(SeedContext(7, 4), Purpose.USER, 0, 10**5)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01


def test_purposes_do_not_alias():
    ctx = SeedContext(11, 0)
    a = stream_uniforms(ctx, Purpose.MARK, 0, 10**5)
    b = stream_uniforms(ctx, Purpose.PAIR, 0, 10**5)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01
    assert len(np.intersect1d(a, b)) == 0


@given(seeds, st.integers(0, 2**40), st.integers(0, 2**40))
def test_pair_symmetric(seed, i, j):
    if i == j:
        return
    ctx = SeedContext(seed)
    assert pair_uniform(ctx, i, j) == pair_uniform(ctx, j, i)


def test_pair_examples():
    ctx = SeedContext(5)
    assert pair_uniform(ctx, 7, 3) == pair_uniform(ctx, 3, 7)
    assert pair_uniform(ctx, 7, 3) != pair_uniform(SeedContext(6), 7, 3)
    with pytest.raises(ValueError):
        pair_uniform(ctx, 4, 4)


def test_pair_uniformity():
    ctx = SeedContext(9)
    rng = np.random.default_rng(0)
    i = rng.integers(0, 10**9, 10**5)
    vals = np.array([pair_uniform(ctx, int(a), int(a) + 1 + k) for k, a in enumerate(i)])
    assert stats.kstest(vals, "uniform").statistic < 0.006
