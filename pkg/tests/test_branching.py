import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from softbool.branching import (BranchingParams, dwass_check, extinction_probability,
                                generation_mean_bound, generation_mean_bound_check, generation_sizes,
                                progeny_batch, sample_offspring_count, total_progeny,
                                total_progeny_law)
from softbool.estimate import fit_tail, run_progeny_experiment
from softbool.randomness import SeedContext

BP = BranchingParams(0.05, 0.25, 2.0, 1)


def test_constants():
    assert BP.c_mix == pytest.approx(16 / 3)
    assert BP.root_mean_offspring == pytest.approx(0.05 * 16 / 3 * 4 / 3)
    assert BP.root_mean_offspring == pytest.approx(0.3556, abs=1e-4)
    assert BP.mean_offspring == pytest.approx(0.05 * 16 / 3 * 1.5)
    assert BP.gate == pytest.approx(0.125)
    assert BP.subcritical


def test_beta_zero():
    bp = BranchingParams(0.0, 0.25, 2.0, 1)
    assert all(sample_offspring_count(SeedContext(s), 0, bp) == 0 for s in range(100))
    assert total_progeny(SeedContext(1), 0, bp) == (0, False)
    assert np.all(generation_sizes(0, 0, 100, bp, 0.25, 3)[:, 1:] == 0)
    assert extinction_probability(bp) == 1.0


def test_root_offspring_mean():
    x = np.array([sample_offspring_count(SeedContext(s), 0, BP) for s in range(10**5)])
    se = x.std() / math.sqrt(len(x))
    assert abs(x.mean() - BP.root_mean_offspring) < 3 * se


def test_descendant_offspring_tail():
    # descendant mixing U**(-gamma/(1-gamma)) has tail z**(1 - 1/gamma)
    bp = BranchingParams(0.05, 0.25, 2.0, 1)
    z = np.array([sample_offspring_count(SeedContext(s), 1, bp) for s in range(2 * 10**5)])
    assert abs(z.mean() - bp.mean_offspring) < 4 * z.std() / math.sqrt(len(z))


def test_progeny_mean():
    out, capped = progeny_batch(11, 0, 10**6, BP)
    assert not capped.any()
    assert out.mean() == pytest.approx(BP.mean_progeny, rel=0.05)


def test_progeny_deterministic():
    a = progeny_batch(5, 100, 1000, BP)
    b = progeny_batch(5, 100, 1000, BP)
    assert np.array_equal(a[0], b[0])
    assert total_progeny(SeedContext(5), 100, BP) == (int(a[0][0]), bool(a[1][0]))


def test_cap_flags():
    bp = BranchingParams(0.5, 0.25, 2.0, 1, cap=50)
    out, capped = progeny_batch(1, 0, 2000, bp)
    assert capped.any() and out.max() <= 50
    assert np.all(out[capped] == 50)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_generation_means(n):
    rows = generation_mean_bound_check(BP, 3, root_mark=0.25, trials=10**5, seed=3)
    r = rows[n - 1]
    assert r["ok"]
    assert abs(r["mean"] - r["exact"]) < 4 * r["stderr"]


def test_generation_one_exact():
    rows = generation_mean_bound_check(BP, 1, 0.25, 10**5)
    assert rows[0]["exact"] == pytest.approx(0.05 * 16 / 3 * 0.25**-0.25)
    assert rows[0]["exact"] == pytest.approx(0.3771, abs=1e-4)
    assert generation_mean_bound(BP, 0.25, 1) >= rows[0]["exact"]


def test_extinction_gate():
    bp = BranchingParams(0.1, 0.25, 2.0, 1)
    q = extinction_probability(bp)
    out, capped = progeny_batch(21, 0, 10**5, bp)
    assert q == pytest.approx(1.0, abs=1e-9)
    assert (~capped).mean() >= 0.99 * q


def test_extinction_supercritical():
    bp = BranchingParams(0.6, 0.25, 2.0, 1, cap=2000)
    q = extinction_probability(bp)
    assert 0 < q < 1
    out, capped = progeny_batch(2, 0, 20000, bp)
    se = math.sqrt(q * (1 - q) / 20000)
    assert abs((~capped).mean() - q) < 4 * se + 0.01


def test_dwass_examples():
    law = {0: Fraction(3, 5), 2: Fraction(2, 5)}
    rows = dwass_check(law, 6)
    assert rows[0].lhs == rows[0].rhs == Fraction(3, 5)
    assert rows[2].lhs == rows[2].rhs == Fraction(18, 125)
    assert float(rows[2].lhs) == pytest.approx(0.144)
    assert all(r.lhs == r.rhs == 0 for r in rows if r.k % 2 == 0)


@given(st.lists(st.integers(0, 20), min_size=1, max_size=5))
def test_dwass_exact_random_laws(weights):
    if sum(weights) == 0:
        return
    law = [Fraction(w, sum(weights)) for w in weights]
    for r in dwass_check(law, 12):
        assert r.lhs == r.rhs


def test_dwass_floats():
    rows = dwass_check([0.5, 0.2, 0.2, 0.1], 12)
    assert all(abs(r.lhs - r.rhs) < 1e-12 for r in rows)
    assert sum(total_progeny_law([0.7, 0.3], 60)) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("law", [{0: 0.5, 1: 0.4}, [0.5, -0.1, 0.6], {1.5: 1.0}])
def test_invalid_laws(law):
    with pytest.raises(ValueError):
        dwass_check(law, 4)


@pytest.mark.parametrize("kw", [dict(beta=-1.0), dict(gamma=1.0), dict(delta=1.0), dict(cap=0)])
def test_params_validation(kw):
    base = dict(beta=0.1, gamma=0.25, delta=2.0, dim=1)
    base.update(kw)
    with pytest.raises(ValueError):
        BranchingParams(**base)


def test_progeny_tail_heavy():
    c = run_progeny_experiment(BranchingParams(0.1, 0.25, 2.0, 1), 4 * 10**6, seed=1)
    f = fit_tail(c, window=(10, 200))
    assert 1.0 < f.exponent < 5.0
