"""Monte Carlo drivers and tail-exponent inference.

Every trial is a deterministic function of ``(master_seed, trial_index)``.
Trials run in fixed chunks, so the results do not depend on the number of
worker processes.  A :class:`SurvivalCurve` keeps the raw values of every
trial above ``m0`` (and every censored trial), which is enough to rebuild
the curve, bootstrap it over trials and run the Hill estimator.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from . import _tree as tr
from .branching import BranchingParams, progeny_batch
from .graph import DEFAULT_BUDGET, BoxTooSmallWarning, default_margin, pack_params
from .model import ModelParams, Regime, kernel, predict, profile, unit_ball_volume
from .randomness import SeedContext

__all__ = [
    "Statistic",
    "SurvivalCurve",
    "TailFit",
    "FitRefused",
    "InsufficientTail",
    "BracketTooWide",
    "ClusterBatch",
    "EventEstimate",
    "cluster_batch",
    "degree_batch",
    "run_diameter_experiment",
    "run_size_experiment",
    "run_cluster_experiment",
    "run_degree_experiment",
    "run_progeny_experiment",
    "run_powerful_event_experiment",
    "fit_tail",
    "hill_estimate",
    "loglog_slope",
    "default_window",
    "pareto_samples",
    "exponential_samples",
    "box_profile_integral",
    "expected_origin_degree",
    "mean_degree_infinite",
    "second_hop_probability",
    "GRID_M0",
    "GRID_RATIO",
]

GRID_M0 = 4.0
GRID_RATIO = 2.0**0.25
CHUNK = 1 << 14
MIN_POINTS = 5
MIN_EVENTS = 50
N_BOOT = 200
BRACKET_TOL = 1e-2


class Statistic(str, Enum):
    DIAMETER = "DiameterPowD"
    SIZE = "ClusterSize"
    DEGREE = "Degree"
    PROGENY = "Progeny"
    SYNTHETIC = "Synthetic"


class FitRefused(Exception):
    """A tail fit was refused; the message says why."""


class InsufficientTail(FitRefused):
    pass


class BracketTooWide(FitRefused):
    pass


# -- survival curves -------------------------------------------------------


def make_grid(m0: float, ratio: float, m_max: float) -> np.ndarray:
    k = max(0, int(math.ceil(math.log(max(m_max, m0) / m0) / math.log(ratio) - 1e-9)))
    return m0 * ratio ** np.arange(k + 1)


@dataclass
class SurvivalCurve:
    """Empirical survival ``P(X > m)`` on a geometric grid with a censoring bracket.

    Attributes
    ----------
    statistic : Statistic
    trials : int
    tail_values : ndarray
        Observed values of trials with ``X > m0`` or censored, in trial order.
    tail_censored : ndarray of bool
    safe_max : float
        Largest ``m`` at which censoring cannot hide an exceedance.
    discrete : bool
        Integer-valued statistic (affects the Hill estimator only).
    """

    statistic: Statistic
    trials: int
    tail_values: np.ndarray
    tail_censored: np.ndarray
    safe_max: float = math.inf
    discrete: bool = False
    m0: float = GRID_M0
    ratio: float = GRID_RATIO
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.statistic = Statistic(self.statistic)
        self.tail_values = np.asarray(self.tail_values, dtype=float)
        self.tail_censored = np.asarray(self.tail_censored, dtype=bool)
        if self.tail_values.shape != self.tail_censored.shape:
            raise ValueError("tail_values and tail_censored differ in shape")
        if len(self.tail_values) > self.trials:
            raise ValueError("more tail samples than trials")
        top = self.tail_values.max() if len(self.tail_values) else self.m0
        self.grid = make_grid(self.m0, self.ratio, top)
        v = np.sort(self.tail_values)
        self.lower_counts = (len(v) - np.searchsorted(v, self.grid, side="right")).astype(np.int64)
        c = np.sort(self.tail_values[self.tail_censored])
        hidden = np.searchsorted(c, self.grid, side="right")
        self.upper_counts = self.lower_counts + hidden.astype(np.int64)

    @classmethod
    def from_samples(cls, values, statistic=Statistic.SYNTHETIC, censored=None, **kw):
        values = np.asarray(values, dtype=float)
        censored = np.zeros(len(values), bool) if censored is None else np.asarray(censored, bool)
        m0 = kw.get("m0", GRID_M0)
        keep = (values > m0) | censored
        return cls(statistic, len(values), values[keep], censored[keep], **kw)

    def counts_at(self, m) -> tuple:
        """``(lower, upper)`` exceedance counts at arbitrary thresholds ``m > m0``."""
        m = np.asarray(m, float)
        v = np.sort(self.tail_values)
        lower = len(v) - np.searchsorted(v, m, side="right")
        c = np.sort(self.tail_values[self.tail_censored])
        return lower.astype(np.int64), (lower + np.searchsorted(c, m, side="right")).astype(np.int64)

    @property
    def upper_survival(self) -> np.ndarray:
        return self.upper_counts / max(self.trials, 1)

    @property
    def lower_survival(self) -> np.ndarray:
        return self.lower_counts / max(self.trials, 1)

    @property
    def censored_fraction(self) -> float:
        return float(self.tail_censored.sum()) / max(self.trials, 1)

    def merge(self, other: "SurvivalCurve") -> "SurvivalCurve":
        """Curve of the concatenated trials (``self`` first)."""
        if other.statistic != self.statistic or other.m0 != self.m0 or other.ratio != self.ratio:
            raise ValueError("curves are not compatible")
        return SurvivalCurve(
            self.statistic, self.trials + other.trials,
            np.concatenate([self.tail_values, other.tail_values]),
            np.concatenate([self.tail_censored, other.tail_censored]),
            min(self.safe_max, other.safe_max), self.discrete, self.m0, self.ratio, dict(self.meta),
        )

    def rows(self):
        for m, a, b, e in zip(self.grid, self.upper_survival, self.lower_survival, self.lower_counts):
            yield float(m), float(a), float(b), int(e)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "upper_survival", "lower_survival", "events"])
            for m, a, b, e in self.rows():
                w.writerow([repr(m), repr(a), repr(b), e])

    def samples_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["value", "censored"])
            for v, c in zip(self.tail_values, self.tail_censored):
                w.writerow([repr(float(v)), int(c)])

    @classmethod
    def from_samples_csv(cls, path, statistic, trials, **kw) -> "SurvivalCurve":
        vals, cens = [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                vals.append(float(row["value"]))
                cens.append(bool(int(row["censored"])))
        return cls(statistic, int(trials), np.array(vals), np.array(cens, dtype=bool), **kw)


def default_window(curve: SurvivalCurve) -> tuple:
    """``[16, safe_max/4]`` when censoring bounds the curve, else ``[10, 1000]``."""
    if math.isfinite(curve.safe_max):
        return (16.0, curve.safe_max / 4.0)
    return (10.0, 1000.0)


# -- fits --------------------------------------------------------------------


@dataclass
class TailFit:
    """Decay rate ``a`` of a survival curve ``~ m**-a`` over a window."""

    exponent: float
    stderr: float
    window: tuple
    method: str
    n_tail: int
    warnings: list = field(default_factory=list)
    cross_check: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "stderr": self.stderr,
            "window": [float(self.window[0]), float(self.window[1])],
            "method": self.method,
            "n_tail": self.n_tail,
            "warnings": list(self.warnings),
        }


def loglog_slope(m, survival) -> float:
    """Minus the least-squares slope of ``log survival`` on ``log m``."""
    x = np.log(np.asarray(m, float))
    y = np.log(np.asarray(survival, float))
    x = x - x.mean()
    return float(-(x @ (y - y.mean())) / (x @ x))


def hill_estimate(values, threshold: float) -> tuple:
    """Hill estimator ``k / sum log(X_i / m)`` over ``X_i > m``; returns ``(a, k)``."""
    v = np.asarray(values, float)
    v = v[v > threshold]
    k = len(v)
    if k == 0:
        return math.nan, 0
    s = float(np.sum(np.log(v / threshold)))
    return (k / s if s > 0 else math.inf), k


def _jitter(values, discrete, rng):
    # spread integers uniformly over (X-1, X] so continuous estimators apply
    if not discrete:
        return values
    return values - rng.random(len(values))


def _ols_bootstrap(curve, g, rng, n_boot):
    n_above = curve.counts_at(g)[0]
    bins = np.append(n_above[:-1] - n_above[1:], n_above[-1])
    p = np.append(bins, curve.trials - n_above[0]) / curve.trials
    draws = rng.multinomial(curve.trials, p, size=n_boot)[:, :-1]
    surv = np.cumsum(draws[:, ::-1], axis=1)[:, ::-1]
    out = []
    for row in surv:
        if np.all(row > 0):
            out.append(loglog_slope(g, row / curve.trials))
    return np.array(out)


def _hill_bootstrap(y, lo, trials, rng, n_boot):
    tail = y[y > lo]
    k = len(tail)
    out = []
    for _ in range(n_boot):
        kk = rng.binomial(trials, k / trials)
        if kk == 0:
            continue
        out.append(hill_estimate(rng.choice(tail, kk, replace=True), lo)[0])
    return np.array(out)


def _stability(y, lo, hi):
    """Hill estimates at thresholds ``lo * 2**j`` with at least 50 exceedances."""
    rows = []
    t = lo
    while t <= hi / 2.0 or not rows:
        a, k = hill_estimate(y, t)
        if k < MIN_EVENTS:
            break
        rows.append((t, a, a / math.sqrt(k)))
        t *= 2.0
    return rows


def _drifts(rows) -> bool:
    if len(rows) < 2:
        return False
    (t0, a0, s0), (t1, a1, s1) = rows[0], rows[-1]
    rate = abs(math.log(a1 / a0)) / math.log(t1 / t0)
    return abs(a1 - a0) > 3.0 * math.hypot(s0, s1) and rate > 0.15


def fit_tail(curve: SurvivalCurve, window: Optional[Sequence[float]] = None,
             method: str = "LogLogOLS", n_boot: int = N_BOOT, seed: int = 0,
             bracket_tol: float = BRACKET_TOL) -> TailFit:
    """Fit the decay rate of ``curve`` over ``window``.

    Parameters
    ----------
    curve : SurvivalCurve
    window : (m_lo, m_hi), optional
        Defaults to :func:`default_window`.  ``m_hi`` may not exceed the
        curve's censoring-safe bound.
    method : {"LogLogOLS", "Hill"}
        The other method is computed as a cross-check; disagreement by more
        than two joint standard errors is reported in ``warnings``.
    n_boot : int
        Bootstrap resamples over trials for the standard error.
    bracket_tol : float
        Largest allowed censoring gap ``(upper - lower) / trials`` inside
        the window.

    Raises
    ------
    InsufficientTail
        Fewer than 5 grid points or 50 exceedances in the window, or a grid
        point without exceedances.
    BracketTooWide
        The window reaches beyond the censoring-safe bound or the bracket gap
        exceeds ``bracket_tol``.
    """
    if method not in ("LogLogOLS", "Hill"):
        raise ValueError(f"unknown method {method!r}")
    lo, hi = default_window(curve) if window is None else (float(window[0]), float(window[1]))
    if not lo < hi:
        raise ValueError("window must satisfy m_lo < m_hi")
    if curve.trials == 0:
        raise InsufficientTail("no trials")
    if hi > curve.safe_max * (1 + 1e-12):
        raise BracketTooWide(f"window end {hi:g} exceeds the censoring-safe bound {curve.safe_max:g}")
    # the window grid does not depend on how far the data reach
    g = make_grid(curve.m0, curve.ratio, hi)
    g = g[(g >= lo * (1 - 1e-12)) & (g <= hi * (1 + 1e-12))]
    lower, upper = curve.counts_at(g)
    n_tail = int((curve.tail_values > lo).sum())
    if len(g) < MIN_POINTS or np.any(lower == 0):
        raise InsufficientTail(f"{len(g)} grid points in window, {int((lower == 0).sum())} without events")
    if n_tail < MIN_EVENTS:
        raise InsufficientTail(f"only {n_tail} events above {lo:g}")
    gap = float(np.max(upper - lower)) / curve.trials
    if gap > bracket_tol:
        raise BracketTooWide(f"censoring gap {gap:.3g} exceeds {bracket_tol:g}")

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    y = _jitter(curve.tail_values, curve.discrete, rng)
    ols = loglog_slope(g, lower / curve.trials)
    hill, _ = hill_estimate(y, lo)
    ols_se = float(np.std(_ols_bootstrap(curve, g, rng, n_boot), ddof=1)) if n_boot > 1 else math.nan
    hill_se = float(np.std(_hill_bootstrap(y, lo, curve.trials, rng, n_boot), ddof=1)) if n_boot > 1 else math.nan

    warn = []
    if abs(ols - hill) > 2.0 * math.hypot(ols_se, hill_se):
        warn.append("methods_disagree")
    if _drifts(_stability(y, lo, hi)):
        warn.append("non_power_law")
    if np.any(upper > lower):
        warn.append("censored_in_window")
    if method == "LogLogOLS":
        main, se, other = ols, ols_se, dict(method="Hill", exponent=hill, stderr=hill_se)
    else:
        main, se, other = hill, hill_se, dict(method="LogLogOLS", exponent=ols, stderr=ols_se)
    return TailFit(main, se, (lo, hi), method, n_tail, warn, other)


# -- synthetic samples --------------------------------------------------------


def pareto_samples(a: float, n: int, seed: int = 0, scale: float = 1.0) -> np.ndarray:
    """``scale * U**(-1/a)``: survival exactly ``(m/scale)**-a`` above ``scale``."""
    u = np.random.default_rng(seed).random(n)
    return scale * (1.0 - u) ** (-1.0 / a)


def exponential_samples(n: int, scale: float = 1.0, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).exponential(scale, n)


# -- parallel execution -------------------------------------------------------

_TREES: dict = {}


def _tree(L: float, d: int):
    key = (float(L), int(d))
    T = _TREES.get(key)
    if T is None:
        _TREES.clear()
        T = tr.new_tree(L, d, tr.lazy_capacity(L, d))
        _TREES[key] = T
    return T


def _chunks(start: int, trials: int, chunk: int = CHUNK):
    return [(s, min(chunk, start + trials - s)) for s in range(start, start + trials, chunk)]


def _run(fn, tasks, workers: int):
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _master(seed) -> int:
    return seed.master_seed if isinstance(seed, SeedContext) else int(seed)


def _origin_code(origin_mark) -> float:
    if origin_mark is None or origin_mark == "random":
        return -1.0
    u = float(origin_mark)
    if not 0.0 < u < 1.0:
        raise ValueError("origin mark must be 'random' or lie in (0, 1)")
    return u


# -- cluster runs ---------------------------------------------------------------


@dataclass
class ClusterBatch:
    """Per-trial results of cluster exploration for trials ``start..start+n-1``."""

    start: int
    size: np.ndarray
    diameter_pow_d: np.ndarray
    censored: np.ndarray
    edges_examined: np.ndarray
    frontier_max: np.ndarray


def _cluster_task(a):
    seed, t0, n, L, d, pp, om, margin, budget = a
    T = _tree(L, d)
    size = np.zeros(n, np.int64)
    diam = np.zeros(n)
    cens = np.zeros(n, np.bool_)
    edges = np.zeros(n, np.int64)
    fr = np.zeros(n, np.int64)
    done = tr.run_cluster_batch(T, np.uint64(seed), np.uint64(t0), n, pp, om, margin, budget,
                                size, diam, cens, edges, fr)
    if done != n:
        raise RuntimeError("point arena overflow; the box realization is implausibly large")
    return ClusterBatch(t0, size, diam, cens, edges, fr)


def cluster_batch(params: ModelParams, box_side: float, seed, start: int, n: int,
                  origin_mark="random", margin: Optional[float] = None,
                  budget: int = DEFAULT_BUDGET) -> ClusterBatch:
    """Explore the origin's cluster for each trial in a range (lazy realization)."""
    margin = default_margin(box_side) if margin is None else float(margin)
    return _cluster_task((_master(seed), int(start), int(n), float(box_side), params.dim,
                          pack_params(params), _origin_code(origin_mark), margin, int(budget)))


def _cluster_reduce(a):
    b = _cluster_task(a)
    keep_s = (b.size > GRID_M0) | b.censored
    keep_d = (b.diameter_pow_d > GRID_M0) | b.censored
    return dict(
        n=len(b.size),
        size=(b.size[keep_s].astype(float), b.censored[keep_s]),
        diam=(b.diameter_pow_d[keep_d], b.censored[keep_d]),
        n_cens=int(b.censored.sum()),
        sum_size=int(b.size.sum()),
        sum_edges=int(b.edges_examined.sum()),
        frontier=int(b.frontier_max.max()) if len(b.size) else 0,
        n_budget=int((b.size > a[-1]).sum()),
    )


def _check_box(box_side, margin):
    if not box_side > 2.0 * margin:
        raise ValueError("margin must be smaller than half the box side")


def run_cluster_experiment(params: ModelParams, box_side: float, trials: int, seed=0,
                           origin_mark="random", margin: Optional[float] = None,
                           budget: int = DEFAULT_BUDGET, workers: Optional[int] = 1,
                           start: int = 0) -> tuple:
    """Diameter and cluster-size curves from one set of trials.

    Returns ``(diameter_curve, size_curve)``.  A trial is censored when its
    cluster reaches within ``margin`` of the boundary or exceeds ``budget``
    points; censored values are lower bounds.
    """
    if trials < 0:
        raise ValueError("trials must be nonnegative")
    margin = default_margin(box_side) if margin is None else float(margin)
    _check_box(box_side, margin)
    pp = pack_params(params)
    om = _origin_code(origin_mark)
    master = _master(seed)
    tasks = [(master, s, n, float(box_side), params.dim, pp, om, margin, int(budget))
             for s, n in _chunks(start, trials)]
    parts = _run(_cluster_reduce, tasks, workers)

    def cat(key, j):
        arrs = [p[key][j] for p in parts]
        return np.concatenate(arrs) if arrs else np.zeros(0, float if j == 0 else bool)

    meta = dict(
        beta=params.beta, gamma=params.gamma, alpha=params.alpha, delta=params.delta,
        dim=params.dim, box_side=float(box_side), margin=margin, budget=int(budget),
        master_seed=master, origin_mark=origin_mark if om < 0 else om,
        censored=sum(p["n_cens"] for p in parts),
        budget_stops=sum(p["n_budget"] for p in parts),
        mean_size=(sum(p["sum_size"] for p in parts) / trials) if trials else math.nan,
        edges_examined=sum(p["sum_edges"] for p in parts),
        frontier_max=max([p["frontier"] for p in parts], default=0),
    )
    safe = (box_side / 2.0 - margin) ** params.dim
    diam = SurvivalCurve(Statistic.DIAMETER, trials, cat("diam", 0), cat("diam", 1),
                         safe_max=safe, meta=dict(meta))
    size = SurvivalCurve(Statistic.SIZE, trials, cat("size", 0), cat("size", 1),
                         discrete=True, meta=dict(meta))
    return diam, size


def _require(cond, msg, force):
    if not cond and not force:
        raise ValueError(msg + " (pass force=True to override)")


def run_diameter_experiment(params: ModelParams, box_side: float, trials: int, seed=0,
                            origin_mark="random", margin: Optional[float] = None,
                            budget: int = DEFAULT_BUDGET, workers: Optional[int] = 1,
                            force: bool = False) -> SurvivalCurve:
    """Survival curve of ``max |x|**d`` over the origin's cluster."""
    _require(predict(params).diameter_exponent is not None,
             "no diameter exponent is predicted for these parameters", force)
    return run_cluster_experiment(params, box_side, trials, seed, origin_mark, margin,
                                  budget, workers)[0]


def run_size_experiment(params: ModelParams, box_side: float, trials: int, seed=0,
                        origin_mark="random", margin: Optional[float] = None,
                        budget: int = DEFAULT_BUDGET, workers: Optional[int] = 1,
                        force: bool = False) -> SurvivalCurve:
    """Survival curve of the number of points in the origin's cluster."""
    _require(predict(params).size_exponent is not None or params.beta == 0,
             "no cluster-size exponent is predicted for these parameters", force)
    return run_cluster_experiment(params, box_side, trials, seed, origin_mark, margin,
                                  budget, workers)[1]


# -- degrees ---------------------------------------------------------------------


def _degree_task(a):
    seed, t0, n, L, d, pp, om, u_above = a
    T = _tree(L, d)
    deg = np.zeros(n, np.int64)
    above = np.zeros(n, np.int64)
    done = tr.run_degree_batch(T, np.uint64(seed), np.uint64(t0), n, pp, om, u_above, deg, above)
    if done != n:
        raise RuntimeError("point arena overflow")
    return deg, above


def degree_batch(params: ModelParams, box_side: float, seed, start: int, n: int,
                 origin_mark="random", u_above: float = 1.0, workers: Optional[int] = 1) -> tuple:
    """Origin degree and number of neighbours with mark above ``u_above`` per trial."""
    pp = pack_params(params)
    tasks = [(_master(seed), s, k, float(box_side), params.dim, pp, _origin_code(origin_mark),
              float(u_above)) for s, k in _chunks(start, n)]
    parts = _run(_degree_task, tasks, workers)
    if not parts:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def run_degree_experiment(params: ModelParams, box_side: float, trials: int, seed=0,
                          origin_mark="random", workers: Optional[int] = 1,
                          tol: float = 0.01) -> SurvivalCurve:
    """Survival curve of the origin's degree.

    Warns with :class:`BoxTooSmallWarning` when the box removes more than
    ``tol`` of the expected degree (for ``dim`` 1 and 2).
    """
    if params.dim <= 2:
        om = None if origin_mark == "random" else float(origin_mark)
        inside = expected_origin_degree(params, box_side, om)
        full = mean_degree_infinite(params, om)
        if full > 0 and 1.0 - inside / full > tol:
            warnings.warn(f"box truncates {1.0 - inside / full:.2%} of the mean degree",
                          BoxTooSmallWarning)
    deg, _ = degree_batch(params, box_side, seed, 0, trials, origin_mark, 1.0, workers)
    keep = deg > GRID_M0
    meta = dict(beta=params.beta, gamma=params.gamma, alpha=params.alpha, delta=params.delta,
                dim=params.dim, box_side=float(box_side), master_seed=_master(seed),
                origin_mark=origin_mark, mean_degree=float(deg.mean()) if trials else math.nan,
                var_degree=float(deg.var(ddof=1)) if trials > 1 else math.nan)
    return SurvivalCurve(Statistic.DEGREE, trials, deg[keep].astype(float),
                         np.zeros(int(keep.sum()), bool), discrete=True, meta=meta)


def box_profile_integral(k: float, box_side: float, dim: int, delta: float) -> float:
    """``int_box rho(k |x|**dim) dx`` over ``[-L/2, L/2]**dim`` (dim 1 or 2)."""
    h = box_side / 2.0
    if k <= 0:
        return box_side**dim
    if dim == 1:
        r0 = 1.0 / k
        if h <= r0:
            return box_side
        return 2.0 * (r0 + k ** (-delta) * (r0 ** (1 - delta) - h ** (1 - delta)) / (delta - 1.0))
    if dim == 2:
        def arc(r):
            # length of the circle of radius r inside the square
            if r <= h:
                return 2.0 * math.pi * r
            return 2.0 * math.pi * r - 8.0 * r * math.acos(h / r)

        r0 = k ** -0.5
        f = lambda r: profile(k * r * r, delta) * arc(r)
        pts = [p for p in (r0, h) if 0 < p < h * math.sqrt(2)]
        return integrate.quad(f, 0.0, h * math.sqrt(2), points=pts or None, limit=200)[0]
    raise NotImplementedError("box integrals are implemented for dim 1 and 2")


def expected_origin_degree(params: ModelParams, box_side: float,
                           origin_mark: Optional[float] = None) -> float:
    """Mean origin degree in the box, by numerical integration over marks and space."""
    b, d, de = params.beta, params.dim, params.delta

    def at(u):
        f = lambda t: box_profile_integral(kernel(u, t, params.gamma, params.alpha) / b,
                                           box_side, d, de)
        return integrate.quad(f, 0.0, 1.0, points=[u], limit=200)[0]

    if b == 0:
        return 0.0
    if origin_mark is not None:
        return at(float(origin_mark))
    return integrate.quad(at, 0.0, 1.0, limit=200)[0]


def mean_degree_infinite(params: ModelParams, origin_mark: Optional[float] = None) -> float:
    """Mean origin degree in infinite volume."""
    c = params.beta * unit_ball_volume(params.dim) * params.delta / (params.delta - 1.0)
    g, a = params.gamma, params.alpha

    def at(u):
        f = lambda t: 1.0 / max(kernel(u, t, g, a), 1e-300)
        return integrate.quad(f, 0.0, 1.0, points=[u], limit=200)[0]

    if origin_mark is not None:
        return c * at(float(origin_mark))
    return c * integrate.quad(at, 0.0, 1.0, limit=200)[0]


# -- branching ------------------------------------------------------------------


def _progeny_task(a):
    seed, t0, n, bp, rm = a
    out, capped = progeny_batch(seed, t0, n, bp, rm)
    keep = (out > GRID_M0) | capped
    return out[keep].astype(float), capped[keep], int(capped.sum())


def run_progeny_experiment(bp: BranchingParams, trials: int, seed=0, root_mark="random",
                           workers: Optional[int] = 1) -> SurvivalCurve:
    """Survival curve of the total progeny (root excluded); capped trials are censored."""
    rm = _origin_code(root_mark)
    tasks = [(_master(seed), s, n, bp, rm) for s, n in _chunks(0, trials, 1 << 18)]
    parts = _run(_progeny_task, tasks, workers)
    vals = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0)
    cens = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, bool)
    meta = dict(beta=bp.beta, gamma=bp.gamma, delta=bp.delta, dim=bp.dim, cap=bp.cap,
                master_seed=_master(seed), capped=sum(p[2] for p in parts))
    return SurvivalCurve(Statistic.PROGENY, trials, vals, cens, safe_max=float(bp.cap),
                         discrete=True, meta=meta)


# -- powerful-vertex event ----------------------------------------------------------


@dataclass
class EventEstimate:
    """Frequency of the two-hop event at each ``m`` with 95% Wilson intervals."""

    ms: np.ndarray
    hits: np.ndarray
    trials: int
    predicted_slope: Optional[float]
    fit: Optional[TailFit] = None
    hit_matrix: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def frequency(self) -> np.ndarray:
        return self.hits / max(self.trials, 1)

    @property
    def ci(self) -> tuple:
        n = max(self.trials, 1)
        z = 1.959963984540054
        p = self.hits / n
        den = 1 + z * z / n
        mid = (p + z * z / (2 * n)) / den
        half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
        return mid - half, mid + half


def _event_task(a):
    seed, t0, n, L, d, pp, om, ms, zeta = a
    T = _tree(L, d)
    hits = np.zeros((n, len(ms)), np.bool_)
    done = tr.run_event_batch(T, np.uint64(seed), np.uint64(t0), n, pp, om, ms, zeta, hits)
    if done != n:
        raise RuntimeError("point arena overflow")
    return hits


def _event_fit(ms, hit_matrix, rng, n_boot) -> TailFit:
    trials = hit_matrix.shape[0]
    hits = hit_matrix.sum(axis=0)
    if np.any(hits == 0) or len(ms) < 2:
        raise InsufficientTail("some m values have no events")
    slope = loglog_slope(ms, hits / trials)
    # resample trials through the distinct hit patterns
    pats, counts = np.unique(hit_matrix, axis=0, return_counts=True)
    reps = []
    for c in rng.multinomial(trials, counts / trials, size=n_boot):
        h = c @ pats
        if np.all(h > 0):
            reps.append(loglog_slope(ms, h / trials))
    se = float(np.std(reps, ddof=1)) if len(reps) > 1 else math.nan
    return TailFit(slope, se, (float(ms[0]), float(ms[-1])), "LogLogOLS", int(hits[0]), [])


def run_powerful_event_experiment(params: ModelParams, box_side: float, trials: int,
                                  ms: Sequence[float], seed=0, origin_mark="random",
                                  workers: Optional[int] = 1, force: bool = False,
                                  n_boot: int = N_BOOT) -> EventEstimate:
    """Frequency that the origin has a neighbour ``y`` with ``|y|**d < m`` and
    ``u_y <= m**-zeta``, for each ``m``, with the log-log slope over ``ms``."""
    pred = predict(params)
    _require(pred.regime == Regime.MIXED.value, "the event experiment needs the Mixed regime", force)
    if pred.zeta is None:
        raise ValueError("zeta is undefined for gamma = 0")
    ms = np.asarray(sorted(float(m) for m in ms))
    if len(ms) == 0 or ms[0] <= 1.0:
        raise ValueError("every m must exceed 1")
    if ms[-1] > (box_side / 2.0) ** params.dim:
        raise ValueError("the box does not contain |y|**d < max(ms)")
    pp = pack_params(params)
    tasks = [(_master(seed), s, n, float(box_side), params.dim, pp, _origin_code(origin_mark),
              ms, float(pred.zeta)) for s, n in _chunks(0, trials)]
    parts = _run(_event_task, tasks, workers)
    hm = np.concatenate(parts) if parts else np.zeros((0, len(ms)), bool)
    pred_slope = (1.0 - params.gamma) * pred.zeta
    est = EventEstimate(ms, hm.sum(axis=0).astype(np.int64), trials, pred_slope, None, hm)
    if trials:
        rng = np.random.default_rng(np.random.SeedSequence([_master(seed), 0xE7]))
        try:
            est.fit = _event_fit(ms, hm, rng, n_boot)
        except InsufficientTail:
            est.fit = None
    return est


def second_hop_probability(params: ModelParams, m: float) -> float:
    """Probability that a vertex with mark ``m**-zeta`` has a neighbour beyond
    ``|x|**d > 2**d m`` (infinite volume, ``alpha = 0``)."""
    pred = predict(params)
    s = m ** (-pred.zeta)
    d, de, b = params.dim, params.delta, params.beta
    w = unit_ball_volume(d)
    R = 2.0**d * m

    def far(t):
        k = kernel(s, t, params.gamma, params.alpha) / b
        # int_{|x|^d > R} rho(k |x|^d) dx with v = |x|^d, dx = omega_d dv
        v0 = max(R, 1.0 / k)
        inner = w * max(0.0, 1.0 / k - R)
        return inner + w * k ** (-de) * v0 ** (1.0 - de) / (de - 1.0)

    lam = integrate.quad(far, 0.0, 1.0, points=[s], limit=200)[0]
    return 1.0 - math.exp(-lam)
