"""Single-type branching process with mixed-Poisson offspring.

Every individual has a type ``W`` and a Poisson number of children with
mean ``beta * c_mix * W``, where ``c_mix = omega_d delta / ((delta-1)(1-gamma))``.
The root has ``W = u_o**-gamma`` (``u_o`` uniform or fixed).  Descendants
are reached through an edge, so their types are size-biased:
``P(W > w) = w**(1 - 1/gamma)``, i.e. ``W = U**(-gamma/(1-gamma))``.
The total progeny dominates the cluster size of the scale-free percolation
model, which in turn dominates the soft Boolean model.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Union

import numpy as np
from numba import njit
from scipy import integrate

from .model import unit_ball_volume
from .randomness import Purpose, SeedContext, absorb, poisson_keyed, trial_key, u1

__all__ = [
    "BranchingParams",
    "sample_offspring_count",
    "total_progeny",
    "progeny_batch",
    "generation_sizes",
    "extinction_probability",
    "generation_mean_exact",
    "generation_mean_bound",
    "generation_mean_bound_check",
    "dwass_check",
    "total_progeny_law",
    "DwassRow",
]

_P_MIX = np.uint64(Purpose.BRANCH_MIX)
_P_CNT = np.uint64(Purpose.BRANCH_COUNT)


@dataclass(frozen=True)
class BranchingParams:
    beta: float
    gamma: float
    delta: float
    dim: int
    cap: int = 10**6

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.delta <= 1.0:
            raise ValueError("delta must exceed 1")
        if self.cap < 1:
            raise ValueError("cap must be positive")

    @property
    def c_mix(self) -> float:
        return unit_ball_volume(self.dim) * self.delta / ((self.delta - 1.0) * (1.0 - self.gamma))

    @property
    def mean_offspring(self) -> float:
        """Mean children of a descendant; below one iff ``beta < gate``."""
        if self.gamma >= 0.5:
            return math.inf if self.beta > 0 else 0.0
        return self.beta * self.c_mix * (1.0 - self.gamma) / (1.0 - 2.0 * self.gamma)

    @property
    def root_mean_offspring(self) -> float:
        """Mean children of a root with a uniform mark."""
        return self.beta * self.c_mix / (1.0 - self.gamma)

    @property
    def mean_progeny(self) -> float:
        """``E[progeny]`` with a uniform root mark (root excluded)."""
        mu = self.mean_offspring
        return self.root_mean_offspring / (1.0 - mu) if mu < 1.0 else math.inf

    @property
    def gate(self) -> float:
        """Largest ``beta`` with the guaranteed subcritical coupling (``gamma < 1/2``)."""
        if self.gamma >= 0.5:
            return 0.0
        w = unit_ball_volume(self.dim)
        return (self.delta - 1.0) * (1.0 - 2.0 * self.gamma) / (w * self.delta)

    @property
    def subcritical(self) -> bool:
        return self.mean_offspring < 1.0


@njit(cache=True)
def _offspring(base, counter, bc, gamma, root_w):
    # counter 0 is the root; root_w <= 0 draws its mark
    if counter == 0:
        if root_w > 0.0:
            w = root_w
        else:
            w = u1(base, _P_MIX, np.uint64(counter)) ** (-gamma)
    else:
        w = u1(base, _P_MIX, np.uint64(counter)) ** (-gamma / (1.0 - gamma))
    return poisson_keyed(absorb(absorb(base, _P_CNT), np.uint64(counter)), bc * w)


@njit(cache=True)
def _progeny(base, bc, gamma, cap, root_w):
    created = 1
    k = 0
    while k < created:
        z = _offspring(base, k, bc, gamma, root_w)
        created += z
        if created - 1 > cap:
            return cap, True
        k += 1
    return created - 1, False


@njit(cache=True)
def _progeny_batch(seed, t0, n, bc, gamma, cap, root_w, out, capped):
    for t in range(n):
        base = trial_key(np.uint64(seed), np.uint64(t0 + t))
        r = _progeny(base, bc, gamma, cap, root_w)
        out[t] = r[0]
        capped[t] = r[1]


@njit(cache=True)
def _generations(seed, t0, n, bc, gamma, root_w, n_max, cap, out):
    for t in range(n):
        base = trial_key(np.uint64(seed), np.uint64(t0 + t))
        # individuals are numbered in birth order, generation by generation
        start = 0
        size = 1
        out[t, 0] = 1
        for g in range(1, n_max + 1):
            nxt = 0
            for k in range(start, start + size):
                nxt += _offspring(base, k, bc, gamma, root_w)
            start += size
            size = nxt
            out[t, g] = size
            if size == 0 or start + size > cap:
                break


def sample_offspring_count(ctx: SeedContext, counter: int, bp: BranchingParams) -> int:
    """Children of individual ``counter`` (0 is the root with a uniform mark).

    ``W = U**-gamma`` for the root and ``U**(-gamma/(1-gamma))`` otherwise;
    the count is Poisson with mean ``beta * c_mix * W``.
    """
    return int(_offspring(ctx.key, np.uint64(counter), bp.beta * bp.c_mix, bp.gamma, -1.0))


def total_progeny(ctx: SeedContext, trial: int, bp: BranchingParams, root_mark: float = -1.0):
    """Descendants of the root (root excluded) for one trial.

    Returns ``(progeny, capped)``; when the population exceeds ``bp.cap`` the
    count is truncated to ``cap`` and ``capped`` is True.
    """
    base = ctx.with_trial(trial).key
    rw = root_mark ** (-bp.gamma) if root_mark > 0 else -1.0
    n, c = _progeny(base, bp.beta * bp.c_mix, bp.gamma, bp.cap, rw)
    return int(n), bool(c)


def progeny_batch(seed: int, start: int, n: int, bp: BranchingParams, root_mark: float = -1.0):
    """Total progeny for trials ``start..start+n-1``; returns ``(progeny, capped)``."""
    out = np.zeros(n, dtype=np.int64)
    capped = np.zeros(n, dtype=np.bool_)
    rw = root_mark ** (-bp.gamma) if root_mark > 0 else -1.0
    _progeny_batch(np.uint64(seed), np.uint64(start), n, bp.beta * bp.c_mix, bp.gamma,
                   bp.cap, rw, out, capped)
    return out, capped


def generation_sizes(seed: int, start: int, n: int, bp: BranchingParams, root_mark: float,
                     n_max: int) -> np.ndarray:
    """Generation sizes ``Z_0..Z_{n_max}`` per trial with the root mark fixed."""
    out = np.zeros((n, n_max + 1), dtype=np.int64)
    _generations(np.uint64(seed), np.uint64(start), n, bp.beta * bp.c_mix, bp.gamma,
                 root_mark ** (-bp.gamma), n_max, bp.cap, out)
    return out


def extinction_probability(bp: BranchingParams, tol: float = 1e-12, max_iter: int = 10**4,
                           damping: float = 0.5) -> float:
    """Extinction probability of the tree started from a uniform-mark root.

    The descendant extinction probability ``q`` is the smallest fixed point
    of ``G(s) = int_0^1 exp(beta c_mix u**(-gamma/(1-gamma)) (s - 1)) du``,
    found by damped iteration from 0.  The root then dies out with
    probability ``int_0^1 exp(beta c_mix u**-gamma (q - 1)) du``.
    """
    bc = bp.beta * bp.c_mix
    if bc == 0.0:
        return 1.0
    a = bp.gamma / (1.0 - bp.gamma)

    def gf(s, expo):
        f = lambda u: math.exp(bc * u ** (-expo) * (s - 1.0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            return integrate.quad(f, 0.0, 1.0, limit=200, epsabs=1e-14, epsrel=1e-13)[0]

    s = 0.0
    for _ in range(max_iter):
        s_new = (1.0 - damping) * s + damping * gf(s, a)
        if abs(s_new - s) < tol:
            s = s_new
            break
        s = s_new
    return min(1.0, gf(min(1.0, s), bp.gamma))


def generation_mean_exact(bp: BranchingParams, root_mark: float, n: int) -> float:
    """``E[Z_n]`` with the root's mark fixed."""
    bc = bp.beta * bp.c_mix
    if n == 0:
        return 1.0
    return bc * root_mark ** (-bp.gamma) * bp.mean_offspring ** (n - 1)


def generation_mean_bound(bp: BranchingParams, root_mark: float, n: int) -> float:
    """``(beta omega_d delta / ((delta-1)(1-2 gamma)))**n * u_o**-gamma``."""
    if bp.gamma >= 0.5:
        raise ValueError("the bound needs gamma < 1/2")
    w = unit_ball_volume(bp.dim)
    base = bp.beta * w * bp.delta / ((bp.delta - 1.0) * (1.0 - 2.0 * bp.gamma))
    return base**n * root_mark ** (-bp.gamma)


def generation_mean_bound_check(bp: BranchingParams, n_max: int, root_mark: float = 0.25,
                                trials: int = 10**5, seed: int = 0) -> list:
    """Monte Carlo generation means against the exact value and the bound.

    Returns one dict per generation ``1..n_max`` with the empirical mean, its
    standard error, the exact mean, the bound and ``ok`` (mean below the
    bound within three standard errors).
    """
    z = generation_sizes(seed, 0, trials, bp, root_mark, n_max)
    rows = []
    for n in range(1, n_max + 1):
        m = float(z[:, n].mean())
        se = float(z[:, n].std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        b = generation_mean_bound(bp, root_mark, n)
        rows.append(dict(n=n, mean=m, stderr=se, exact=generation_mean_exact(bp, root_mark, n),
                         bound=b, ok=m <= b + 3.0 * se))
    return rows


# -- exact Dwass identity ------------------------------------------------


@dataclass(frozen=True)
class DwassRow:
    k: int
    lhs: Union[float, Fraction]
    rhs: Union[float, Fraction]


def _law_table(law) -> list:
    if isinstance(law, Mapping):
        if any(int(j) != j or j < 0 for j in law):
            raise ValueError("offspring values must be nonnegative integers")
        top = max(law)
        p = [0] * (int(top) + 1)
        for j, v in law.items():
            p[int(j)] = v
    else:
        p = list(law)
    if any(v < 0 for v in p):
        raise ValueError("probabilities must be nonnegative")
    if abs(float(sum(p)) - 1.0) > 1e-12:
        raise ValueError("offspring law must sum to one")
    return p


def _convolve(a, b, n):
    zero = a[0] * 0
    out = [zero] * (n + 1)
    for i, x in enumerate(a[: n + 1]):
        if x == 0:
            continue
        for j, y in enumerate(b[: n + 1 - i]):
            out[i + j] += x * y
    return out


def total_progeny_law(law, k_max: int) -> list:
    """``P(T = k)`` for ``k = 0..k_max`` where ``T`` counts the root.

    Computed by recursion on the tree: ``T = 1 + T_1 + ... + T_Z``.
    """
    p = _law_table(law)
    zero = p[0] * 0
    f = [zero] * (k_max + 1)
    for k in range(1, k_max + 1):
        # f[1..k-1] are final; sums of j subtrees must total k - 1
        acc = zero
        power = [zero] * (k_max + 1)
        power[0] = zero + 1
        for j in range(len(p)):
            if j > 0:
                power = _convolve(power, f, k - 1)
            if p[j] != 0:
                acc += p[j] * power[k - 1]
        f[k] = acc
    return f


def dwass_check(law, k_max: int) -> list:
    """Rows ``(k, P(T = k), P(S_k = k - 1) / k)`` for ``k = 1..k_max``.

    ``S_k`` is a sum of ``k`` iid offspring counts.  Exact when the law is
    given as :class:`fractions.Fraction` values.
    """
    p = _law_table(law)
    lhs = total_progeny_law(p, k_max)
    rows = []
    zero = p[0] * 0
    power = [zero] * k_max
    power[0] = zero + 1
    for k in range(1, k_max + 1):
        power = _convolve(power, p, k_max - 1)
        rhs = power[k - 1] / k
        rows.append(DwassRow(k, lhs[k], rhs))
    return rows
