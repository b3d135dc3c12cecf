"""Oracle, property and acceptance checks shared by ``softbool validate`` and the tests.

Each check returns a :class:`CheckResult`.  ``FAST_CHECKS`` are exact or
cheap; ``FULL_CHECKS`` add the Monte Carlo slope experiments.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import _tree as tr
from .branching import BranchingParams, dwass_check
from .estimate import (FitRefused, SurvivalCurve, degree_batch, fit_tail, make_grid,
                       pareto_samples, run_cluster_experiment, run_degree_experiment,
                       run_progeny_experiment)
from .graph import pack_params
from .model import ModelParams, degree_intensity_above
from .paths import skeleton, skeleton_bruteforce
from .pointcloud import add_palm_origin, sample_cloud
from .randomness import SeedContext

__all__ = ["CheckResult", "FAST_CHECKS", "FULL_CHECKS", "run_checks"]


@dataclass
class CheckResult:
    check_id: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.check_id}: {self.detail} ({self.seconds:.1f}s)"


def _timed(fn):
    def wrapper(*a, **kw):
        t = time.perf_counter()
        r = fn(*a, **kw)
        r.seconds = time.perf_counter() - t
        return r

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _engine_tree(cloud, engine):
    """Explicit tree for ``cloud`` built by ``engine`` (a tree module)."""
    if engine is tr:
        return cloud.tree()
    T = engine.new_tree(cloud.box_side, cloud.dim, max(cloud.n_points, 1), cloud.depth)
    engine.load_explicit(T, cloud.positions, cloud.marks, cloud.ids, cloud.leaf, cloud.rank)
    T.st[engine.ST_HAS_ORIGIN] = int(cloud.has_origin)
    T.fs[engine.FS_ORIGIN_MARK] = cloud.origin_mark if cloud.has_origin else 0.5
    return T


def _small_clouds(seed, count, box_side, dim, max_points):
    """``count`` Palm clouds with at most ``max_points`` points."""
    out = []
    t = 0
    while len(out) < count:
        ctx = SeedContext(seed, t)
        t += 1
        c = sample_cloud(ctx, box_side, dim)
        if c.n_points <= max_points:
            out.append((ctx, add_palm_origin(c)))
    return out


# -- exact checks ------------------------------------------------------------

FORMULATION_SETS = [
    ModelParams(0.5, 0.3, 0.0, 2.0, 1),
    ModelParams(1.0, 0.6, 0.0, 1.5, 1),
    ModelParams(0.2, 0.5, 0.0, 3.0, 2),
    ModelParams(2.0, 0.2, 0.0, 2.5, 2),
    ModelParams(0.05, 0.7, 0.0, 1.2, 1),
]


@_timed
def check_formulation(n_clouds: int = 100, seed: int = 101, engine=tr) -> CheckResult:
    """Criterion 1: rule form and radius form agree on every pair."""
    per = max(1, n_clouds // len(FORMULATION_SETS))
    bad = pairs = 0
    for s, p in enumerate(FORMULATION_SETS):
        L, d = (120.0, 1) if p.dim == 1 else (11.0, 2)
        for ctx, cloud in _small_clouds(seed + s, per, L, d, 200):
            T = _engine_tree(cloud, engine)
            bad += int(engine.formulation_mismatches(T, ctx.key, pack_params(p)))
            n = len(cloud)
            pairs += n * (n - 1) // 2
    return CheckResult("formulation_equivalence", bad == 0,
                       f"{bad} mismatches over {pairs} pairs", data=dict(mismatches=bad, pairs=pairs))


@_timed
def check_couplings(n_clouds: int = 60, seed: int = 202) -> CheckResult:
    """Criterion 7: edge sets grow with alpha (0, gamma/delta, gamma) and with beta."""
    bad = pairs = 0
    for s, (g, de, d) in enumerate([(0.3, 2.0, 1), (0.6, 1.5, 1), (0.45, 3.0, 2)]):
        L = 100.0 if d == 1 else 10.0
        for ctx, cloud in _small_clouds(seed + s, n_clouds // 3, L, d, 200):
            T = cloud.tree()
            chain = [ModelParams(0.4, g, a, de, d) for a in (0.0, g / de, g)]
            for lo, hi in zip(chain, chain[1:]):
                bad += int(tr.inclusion_violations(T, ctx.key, pack_params(lo), pack_params(hi)))
            for a in (0.0, g / de, g):
                lo, hi = ModelParams(0.2, g, a, de, d), ModelParams(0.5, g, a, de, d)
                bad += int(tr.inclusion_violations(T, ctx.key, pack_params(lo), pack_params(hi)))
            n = len(cloud)
            pairs += 5 * n * (n - 1) // 2
    return CheckResult("coupling_inclusions", bad == 0, f"{bad} violations over {pairs} pair checks",
                       data=dict(violations=bad))


NEIGHBOR_SETS = [
    ModelParams(0.3, 0.4, 0.0, 2.0, 1),
    ModelParams(1.5, 0.7, 0.0, 1.3, 1),
    ModelParams(0.3, 0.5, 0.25, 2.0, 2),
    ModelParams(0.1, 0.2, 0.2, 4.0, 2),
    ModelParams(0.05, 0.0, 0.0, 1.5, 1),
]


@_timed
def check_fast_naive(n_clouds: int = 1000, rows_per_cloud: int = 32, seed: int = 303) -> CheckResult:
    """Criterion 11: fast and naive neighbour sets agree; reports query timings."""
    rng = np.random.default_rng(seed)
    bad = queries = 0
    t_fast = t_naive = 0.0
    for c in range(n_clouds):
        p = NEIGHBOR_SETS[c % len(NEIGHBOR_SETS)]
        L, d = (float(rng.integers(50, 450)), 1) if p.dim == 1 else (float(rng.integers(6, 21)), 2)
        ctx, cloud = _small_clouds(seed * 7919 + c, 1, L, d, 500)[0]
        T = cloud.tree()
        n = cloud.n_points
        pick = rng.choice(n, min(n, rows_per_cloud - 1), replace=False) if n else np.zeros(0, int)
        rows = np.concatenate([[-1], pick]).astype(np.int64)
        bad += int(tr.fast_naive_mismatches(T, ctx.key, pack_params(p), rows))
        queries += len(rows)
    # advisory benchmark on larger clouds
    pp = pack_params(NEIGHBOR_SETS[0])
    for k in range(3):
        ctx = SeedContext(seed, 10**6 + k)
        cloud = add_palm_origin(sample_cloud(ctx, 2000.0, 1))
        T = cloud.tree()
        rows = np.arange(0, cloud.n_points, 7, dtype=np.int64)
        t0 = time.perf_counter()
        for a in rows:
            tr.neighbors_fast(T, ctx.key, pp, a)
        t1 = time.perf_counter()
        for a in rows[:100]:
            tr.neighbors_naive(T, ctx.key, pp, a)
        t2 = time.perf_counter()
        t_fast += (t1 - t0) / len(rows)
        t_naive += (t2 - t1) / 100
    bench = dict(points=2000, fast_us=1e6 * t_fast / 3, naive_us=1e6 * t_naive / 3)
    return CheckResult(
        "fast_vs_naive_neighbors", bad == 0,
        f"{bad} mismatches over {queries} queries on {n_clouds} clouds; "
        f"benchmark at ~2000 points: fast {bench['fast_us']:.1f}us, naive {bench['naive_us']:.1f}us per query",
        data=dict(mismatches=bad, queries=queries, benchmark=bench))


def _valley(marks) -> bool:
    # nonincreasing then nondecreasing, ties broken by index as in MarkPath
    keys = [(m, i) for i, m in enumerate(marks)]
    k = min(range(len(keys)), key=lambda i: keys[i])
    return all(keys[i] > keys[i + 1] for i in range(k)) and \
        all(keys[i] < keys[i + 1] for i in range(k, len(keys) - 1))


@_timed
def check_skeleton(n_short: int = 10**4, n_long: int = 10**5, seed: int = 404) -> CheckResult:
    """Criterion 8: iterative removal equals brute force; valley and endpoint invariants."""
    rng = np.random.default_rng(seed)
    bad_eq = bad_inv = 0
    for _ in range(n_short):
        n = int(rng.integers(2, 11))
        m = rng.random(n) if rng.random() < 0.7 else rng.integers(0, 3, n).astype(float)
        a, b = skeleton(m), skeleton_bruteforce(m)
        if a.skeleton_indices != b.skeleton_indices or a.removal_order != b.removal_order:
            bad_eq += 1
    for _ in range(n_long):
        n = int(rng.integers(11, 40))
        m = rng.random(n)
        sk = skeleton(m)
        idx = sk.skeleton_indices
        marks = [m[i] for i in idx]
        ok = idx[0] == 0 and idx[-1] == n - 1 and _valley(marks)
        ok = ok and sum(len(s) for s in sk.connector_segments) + len(idx) == n
        if not ok:
            bad_inv += 1
    return CheckResult("skeleton_oracle", bad_eq == 0 and bad_inv == 0,
                       f"{bad_eq} oracle mismatches in {n_short}, {bad_inv} invariant failures in {n_long}")


@_timed
def check_dwass(n_laws: int = 20, k_max: int = 12, seed: int = 505) -> CheckResult:
    """Criterion 9: exact Dwass identity on random finite-support laws."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    exact_ok = True
    for i in range(n_laws):
        support = int(rng.integers(2, 6))
        w = rng.integers(1, 20, support + 1).tolist()
        if i % 2:
            w[1] = 0
        tot = sum(w)
        law = [Fraction(x, tot) for x in w]
        for row in dwass_check(law, k_max):
            exact_ok &= row.lhs == row.rhs
        for row in dwass_check([float(x) for x in law], k_max):
            worst = max(worst, abs(row.lhs - row.rhs))
    ok = exact_ok and worst <= 1e-12
    return CheckResult("dwass_identity", ok,
                       f"{n_laws} laws, k<={k_max}: rational tables equal={exact_ok}, float max diff {worst:.2e}")


FIT_WINDOWS = {0.5: 4.0e6, 1.0: 4.0e3, 1.5: 4.0e2, 2.0: 1.2e2}


@_timed
def check_fit_calibration(n: int = 10**6, seed: int = 606) -> CheckResult:
    """Criterion 12: both estimators recover synthetic Pareto exponents within 0.05."""
    rows = []
    ok = True
    for k, (a, hi) in enumerate(FIT_WINDOWS.items()):
        curve = SurvivalCurve.from_samples(pareto_samples(a, n, seed + k, scale=4.0))
        f = fit_tail(curve, (4.0, hi), seed=seed)
        h = f.cross_check["exponent"]
        good = abs(f.exponent - a) <= 0.05 and abs(h - a) <= 0.05
        ok &= good
        rows.append(f"a={a}: ols {f.exponent:.3f} hill {h:.3f}")
    return CheckResult("fit_calibration", ok, "; ".join(rows))


# -- Monte Carlo acceptance runs -------------------------------------------------


def _poisson_gof(x, lam):
    kmax = int(max(x.max(), 1))
    exp_p = stats.poisson.pmf(np.arange(kmax + 1), lam)
    obs = np.bincount(x, minlength=kmax + 1).astype(float)
    exp_c = exp_p * len(x)
    # pool bins from the right until expected counts reach 5
    o, e = [], []
    acc_o = acc_e = 0.0
    for k in range(kmax, -1, -1):
        acc_o += obs[k]
        acc_e += exp_c[k] if k < kmax else len(x) * stats.poisson.sf(k - 1, lam)
        if acc_e >= 5:
            o.append(acc_o)
            e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        o[-1] += acc_o
        e[-1] += acc_e
    o, e = np.array(o), np.array(e)
    e *= o.sum() / e.sum()
    return stats.chisquare(o, e).pvalue


@_timed
def check_degree_law(lam: Optional[float] = None, trials: int = 10**4, seed: int = 707,
                     check_id: str = "degree_law") -> CheckResult:
    """Criterion 2: neighbours above ``u_o`` are Poisson with mean ``lam``.

    ``lam`` defaults to the stated target ``0.2 pi``; the intensity integral
    gives ``0.3 pi`` for the same parameters.
    """
    p = ModelParams(0.1, 0.5, 0.0, 2.0, 2)
    u = 0.25
    lam = 0.2 * math.pi if lam is None else float(lam)
    _, x = degree_batch(p, 20.0, seed, 0, trials, origin_mark=u, u_above=u)
    mean, var = float(x.mean()), float(x.var(ddof=1))
    se_m = math.sqrt(lam / trials)
    se_v = math.sqrt((lam + 2 * lam * lam) / trials)
    pval = _poisson_gof(x, lam)
    ok = abs(mean - lam) <= 3 * se_m and abs(var - lam) <= 3 * se_v and pval > 0.01
    return CheckResult(check_id, ok,
                       f"lambda={lam:.4f}: mean {mean:.4f} (3se {3 * se_m:.4f}), var {var:.4f} "
                       f"(3se {3 * se_v:.4f}), chi2 p={pval:.3g}",
                       data=dict(mean=mean, var=var, p=pval, lam=lam,
                                 integral=degree_intensity_above(p, u)))


def _slope_result(check_id, curve, window, target, tol, extra=""):
    try:
        f = fit_tail(curve, window)
    except FitRefused as e:
        return CheckResult(check_id, False, f"fit refused: {e}{extra}")
    ok = abs(f.exponent - target) <= tol
    return CheckResult(check_id, ok,
                       f"slope {f.exponent:.3f} +- {f.stderr:.3f} (target {target} +- {tol}), "
                       f"hill {f.cross_check['exponent']:.3f}, n_tail {f.n_tail}{extra}",
                       data=dict(fit=f.to_dict()))


@_timed
def check_degree_tail(trials: int = 4 * 10**6, seed: int = 808, workers=None) -> CheckResult:
    """Criterion 3: origin-degree survival slope 2 at gamma = 1/2."""
    p = ModelParams(0.75, 0.5, 0.0, 2.0, 1)
    c = run_degree_experiment(p, 4000.0, trials, seed, workers=workers)
    return _slope_result("degree_power_law", c, (10.0, 1000.0), 2.0, 0.2)


def _censored_in_window(curve, window):
    lo, hi = window
    g = make_grid(curve.m0, curve.ratio, hi)
    lower, upper = curve.counts_at(g[g >= lo])
    return float(np.max(upper - lower)) / max(curve.trials, 1)


@_timed
def check_diameter_long_range(trials: int = 10**6, seed: int = 909, workers=None) -> CheckResult:
    """Criterion 4: diameter slope delta - 1 = 1 for gamma = 0.2."""
    p = ModelParams(0.1, 0.2, 0.0, 2.0, 1)
    c = run_cluster_experiment(p, 2.0e4, trials, seed, workers=workers)[0]
    w = (16.0, 1.0e3)
    cf = _censored_in_window(c, w)
    r = _slope_result("diameter_slope_long_range", c, w, 1.0, 0.2, f", censored in window {cf:.2e}")
    r.passed = r.passed and cf < 1e-3
    return r


@_timed
def check_diameter_mixed(trials: int = 10**6, seed: int = 1010, workers=None) -> CheckResult:
    """Criterion 5: diameter slope (1 - gamma) zeta = 0.5 for gamma = 0.5."""
    p = ModelParams(0.05, 0.5, 0.0, 2.0, 1)
    c = run_cluster_experiment(p, 4.0e4, trials, seed, workers=workers)[0]
    return _slope_result("diameter_slope_mixed", c, (16.0, 1.0e4), 0.5, 0.1)


SIZE_BETA = 0.045


@_timed
def check_size_tail(trials: int = 10**7, seed: int = 1111, workers=None) -> CheckResult:
    """Criterion 6: cluster-size slope 1/gamma - 1 = 1.5 for alpha = 0 and alpha = gamma."""
    parts = []
    ok = True
    for a in (0.0, 0.4):
        p = ModelParams(SIZE_BETA, 0.4, a, 2.0, 1)
        c = run_cluster_experiment(p, 1.0e4, trials, seed, workers=workers)[1]
        r = _slope_result(f"alpha={a}", c, (10.0, 1.0e3), 1.5, 0.2)
        ok &= r.passed
        parts.append(f"alpha={a}: {r.detail}")
    return CheckResult("size_slope", ok, "; ".join(parts))


BRANCH_BETA = 0.05  # the offspring example parameters; the gate is 0.125


@_timed
def check_branching(cluster_trials: int = 10**6, progeny_trials: int = 10**8, seed: int = 1212,
                    workers=None) -> CheckResult:
    """Criterion 10: cluster sizes below the progeny law; progeny tail slope 1/gamma - 1."""
    g = 0.25
    p = ModelParams(BRANCH_BETA, g, g, 2.0, 1)
    bp = BranchingParams(BRANCH_BETA, g, 2.0, 1)
    size = run_cluster_experiment(p, 2000.0, cluster_trials, seed, workers=workers)[1]
    prog_small = run_progeny_experiment(bp, cluster_trials, seed, workers=workers)
    worst = -math.inf
    n = cluster_trials
    for m in size.grid:
        s1 = (size.tail_values > m).sum() / n
        s2 = (prog_small.tail_values > m).sum() / n
        se = math.sqrt(s1 * (1 - s1) / n + s2 * (1 - s2) / n)
        if se > 0:
            worst = max(worst, (s1 - s2) / se)
    dominated = worst <= 3.0
    prog = run_progeny_experiment(bp, progeny_trials, seed + 1, workers=workers)
    r = _slope_result("progeny_tail", prog, (10.0, 1.0e3), 1.0 / g - 1.0, 0.2)
    ok = dominated and r.passed
    return CheckResult("branching_dominance_and_tail", ok,
                       f"dominance worst z={worst:.2f} (pass={dominated}); progeny: {r.detail}",
                       data=dict(worst_z=worst, tail=r.data))


FAST_CHECKS: dict = {
    "formulation_equivalence": check_formulation,
    "coupling_inclusions": check_couplings,
    "fast_vs_naive_neighbors": check_fast_naive,
    "skeleton_oracle": check_skeleton,
    "dwass_identity": check_dwass,
    "fit_calibration": check_fit_calibration,
}

FULL_CHECKS: dict = {
    **FAST_CHECKS,
    "degree_law": check_degree_law,
    "degree_power_law": check_degree_tail,
    "diameter_slope_long_range": check_diameter_long_range,
    "diameter_slope_mixed": check_diameter_mixed,
    "size_slope": check_size_tail,
    "branching_dominance_and_tail": check_branching,
}


def run_checks(level: str = "fast", only=None, log: Callable = print) -> list:
    table = FAST_CHECKS if level == "fast" else FULL_CHECKS
    out = []
    for name, fn in table.items():
        if only and name not in only:
            continue
        r = fn()
        log(r.line())
        out.append(r)
    return out
