import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from softbool.pointcloud import add_palm_origin, make_cloud, sample_cloud, write_cloud_csv
from softbool.randomness import SeedContext


def test_count_moments():
    n = np.array([sample_cloud(SeedContext(3, t), 10.0, 1).n_points for t in range(10**4)])
    assert abs(n.mean() - 10) < 0.3
    assert abs(n.var() - 10) < 1.0


def test_tiny_box_is_empty():
    empty = sum(sample_cloud(SeedContext(4, t), 1e-3, 2).n_points == 0 for t in range(1000))
    assert empty >= 990


@given(st.integers(0, 2**32), st.integers(0, 10**6))
def test_deterministic(seed, trial):
    a = sample_cloud(SeedContext(seed, trial), 6.0, 2)
    b = sample_cloud(SeedContext(seed, trial), 6.0, 2)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.marks, b.marks)
    assert np.array_equal(a.ids, b.ids)


@pytest.mark.parametrize("L,d", [(30.0, 1), (7.0, 2), (3.0, 3)])
def test_cloud_invariants(L, d):
    c = add_palm_origin(sample_cloud(SeedContext(8, 1), L, d), 0.4)
    assert np.all(np.abs(c.positions) <= L / 2)
    ids = [p.id for p in c.points]
    assert len(set(ids)) == len(ids) and 0 in ids
    assert c.position_of(0).tolist() == [0.0] * d
    assert np.all((c.marks > 0) & (c.marks < 1))


def test_fixed_origin_mark():
    c = sample_cloud(SeedContext(1), 20.0, 1)
    o = add_palm_origin(c, 0.25)
    assert o.mark_of(0) == 0.25
    assert len(o) == len(c) + 1
    with pytest.raises(ValueError):
        add_palm_origin(o, 0.25)


def test_random_origin_mark_uniform():
    u = [add_palm_origin(make_cloud(np.zeros((0, 1)), [], 5.0), "random", SeedContext(2, t)).origin_mark
         for t in range(10**5)]
    assert stats.kstest(u, "uniform").statistic < 0.006


def test_spatial_homogeneity():
    left = np.empty(10**4, int)
    right = np.empty(10**4, int)
    for t in range(10**4):
        x = sample_cloud(SeedContext(5, t), 8.0, 1).positions[:, 0]
        left[t] = np.sum(x < 0)
        right[t] = np.sum(x >= 0)
    for cnt in (left, right):
        k = np.arange(0, 13)
        obs = np.array([np.sum(cnt == j) for j in k[:-1]] + [np.sum(cnt >= k[-1])])
        pmf = stats.poisson.pmf(k[:-1], 4.0)
        exp = 10**4 * np.append(pmf, 1 - pmf.sum())
        assert stats.chisquare(obs, exp).pvalue > 0.01
    assert abs(np.corrcoef(left, right)[0, 1]) < 0.03


def test_mark_position_independence():
    xs, us = [], []
    t = 0
    while sum(map(len, xs)) < 10**5:
        c = sample_cloud(SeedContext(6, t), 50.0, 1)
        xs.append(c.positions[:, 0])
        us.append(c.marks)
        t += 1
    assert abs(np.corrcoef(np.concatenate(xs), np.concatenate(us))[0, 1]) < 0.01


@pytest.mark.parametrize("bad", [
    dict(positions=[[0.1], [0.2]], marks=[0.5], box_side=1.0),
    dict(positions=[[0.9]], marks=[0.5], box_side=1.0),
    dict(positions=[[0.1]], marks=[1.0], box_side=1.0),
    dict(positions=[[0.1], [0.2]], marks=[0.5, 0.6], box_side=1.0, ids=[3, 3]),
    dict(positions=[[0.1]], marks=[0.5], box_side=1.0, ids=[0]),
])
def test_make_cloud_rejects(bad):
    with pytest.raises(ValueError):
        make_cloud(**bad)


def test_cloud_csv(tmp_path):
    c = make_cloud([[0.5, -1.0], [1.25, 2.0]], [0.1, 0.9], 10.0, ids=[7, 3], origin_mark=0.3)
    write_cloud_csv(c, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "id,x1,x2,mark"
    rows = {int(r.split(",")[0]): r for r in lines[1:]}
    assert rows[0] == "0,0.0,0.0,0.3" and rows[7] == "7,0.5,-1.0,0.1"
