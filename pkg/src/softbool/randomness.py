"""Counter-based randomness.

Every random quantity in a realization is a pure function of
``(master_seed, trial_index, purpose, key...)``.  Keys are mixed with the
SplitMix64 finalizer, which is a bijection on 64-bit words, so there is no
generator state to carry around and any value can be recomputed on demand
in any order.  This is what lets the graph be explored lazily while still
being a single well-defined realization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "SeedContext",
    "Purpose",
    "stream_uniform",
    "pair_uniform",
    "stream_uniforms",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53
_TINY = 0.5 * _INV53  # replaces an exact zero
_ONE_MINUS = 1.0 - _INV53  # largest double below one


class Purpose:
    """Stream tags; distinct tags never share outputs."""

    COUNT = 1
    MINMARK = 2
    SPLIT = 3
    POSITION = 4
    MARK = 5
    BLOCK_MIN = 6
    BLOCK_ARG = 7
    PAIR = 8
    PAIR_ARG = 9
    ORIGIN_MARK = 10
    ORIGIN_BLOCK_MIN = 11
    ORIGIN_BLOCK_ARG = 12
    BRANCH_MIX = 13
    BRANCH_COUNT = 14
    ORIGIN_PAIR_ARG = 15
    ROOT_COUNT = 16
    USER = 32


@njit(cache=True, inline="always")
def mix64(z):
    """SplitMix64 finalizer (bijective on uint64)."""
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def absorb(h, key):
    return mix64(h ^ mix64(np.uint64(key)))


@njit(cache=True)
def trial_key(master_seed, trial_index):
    h = mix64(np.uint64(master_seed) ^ np.uint64(0x5851F42D4C957F2D))
    return absorb(h, trial_index)


@njit(cache=True, inline="always")
def to_unit(h):
    v = float(h >> _S11) * _INV53
    if v == 0.0:
        v = _TINY
    return v


@njit(cache=True, inline="always")
def u1(base, purpose, a):
    return to_unit(absorb(absorb(base, purpose), a))


@njit(cache=True, inline="always")
def u2(base, purpose, a, b):
    return to_unit(absorb(absorb(absorb(base, purpose), a), b))


@njit(cache=True, inline="always")
def u3(base, purpose, a, b, c):
    return to_unit(absorb(absorb(absorb(absorb(base, purpose), a), b), c))


@njit(cache=True, inline="always")
def u4(base, purpose, a, b, c, e):
    return to_unit(absorb(absorb(absorb(absorb(absorb(base, purpose), a), b), c), e))


@njit(cache=True, inline="always")
def clamp_open(v):
    if v >= 1.0:
        return _ONE_MINUS
    if v <= 0.0:
        return _TINY
    return v


@njit(cache=True, inline="always")
def min_of_uniforms(u, k):
    """Minimum of ``k`` iid uniforms on (0,1) from one uniform ``u``."""
    return clamp_open(-math.expm1(math.log1p(-u) / k))


# -- discrete samplers driven by keyed uniforms ----------------------------
#
# Each sampler receives a pre-absorbed 64-bit key and draws its i-th uniform
# as to_unit(absorb(key, i)); the number of uniforms used is unbounded but
# deterministic.


@njit(cache=True, inline="always")
def _ku(key, i):
    return to_unit(absorb(key, i))


@njit(cache=True)
def poisson_keyed(key, lam):
    if lam <= 0.0:
        return 0
    if lam < 10.0:
        u = _ku(key, 0)
        k = 0
        p = math.exp(-lam)
        f = p
        while u > f and k < 1000:
            k += 1
            p *= lam / k
            f += p
        return k
    # transformed rejection with squeeze (PTRS)
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    i = 0
    while True:
        u = _ku(key, i) - 0.5
        v = _ku(key, i + 1)
        i += 2
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return np.int64(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)) <= (
            -lam + k * loglam - math.lgamma(k + 1.0)
        ):
            return np.int64(k)


@njit(cache=True)
def binomial_keyed(key, n, p):
    if n <= 0 or p <= 0.0:
        return 0
    if p >= 1.0:
        return n
    flip = p > 0.5
    q = 1.0 - p if flip else p
    if n * q < 10.0:
        # inversion
        u = _ku(key, 0)
        r = q / (1.0 - q)
        pk = math.exp(n * math.log1p(-q))
        f = pk
        k = 0
        while u > f and k < n:
            pk *= r * (n - k) / (k + 1.0)
            k += 1
            f += pk
        return n - k if flip else k
    # BTRS
    spq = math.sqrt(n * q * (1.0 - q))
    b = 1.15 + 2.53 * spq
    a = -0.0873 + 0.0248 * b + 0.01 * q
    c = n * q + 0.5
    vr = 0.92 - 4.2 / b
    alpha = (2.83 + 5.1 / b) * spq
    lpq = math.log(q / (1.0 - q))
    m = math.floor((n + 1) * q)
    h = math.lgamma(m + 1.0) + math.lgamma(n - m + 1.0)
    i = 0
    while True:
        u = _ku(key, i) - 0.5
        v = _ku(key, i + 1)
        i += 2
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + c)
        if k < 0 or k > n:
            continue
        if us >= 0.07 and v <= vr:
            break
        v = math.log(v * alpha / (a / (us * us) + b))
        if v <= h - math.lgamma(k + 1.0) - math.lgamma(n - k + 1.0) + (k - m) * lpq:
            break
    k = np.int64(k)
    return n - k if flip else k


# -- public python surface -------------------------------------------------


@dataclass(frozen=True)
class SeedContext:
    """Address of one realization: ``(master_seed, trial_index)``."""

    master_seed: int
    trial_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "trial_index"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2**64):
                raise ValueError(f"{name} must fit in an unsigned 64-bit word, got {v}")

    @property
    def key(self) -> np.uint64:
        return np.uint64(trial_key(np.uint64(self.master_seed), np.uint64(self.trial_index)))

    def with_trial(self, trial_index: int) -> "SeedContext":
        return SeedContext(self.master_seed, trial_index)


def stream_uniform(ctx: SeedContext, purpose: int, counter: int) -> float:
    """Deterministic uniform on the open interval (0, 1)."""
    return float(u1(ctx.key, np.uint64(purpose), np.uint64(counter)))


@njit(cache=True)
def _stream_block(base, purpose, start, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = u1(base, np.uint64(purpose), np.uint64(start + i))
    return out


def stream_uniforms(ctx: SeedContext, purpose: int, start: int, n: int) -> np.ndarray:
    """Vector form of :func:`stream_uniform` for counters ``start..start+n-1``."""
    return _stream_block(ctx.key, np.uint64(purpose), np.uint64(start), int(n))


_P_PAIR = np.uint64(Purpose.PAIR)


@njit(cache=True, inline="always")
def pair_leaf(base, i, j):
    if i < j:
        return u2(base, _P_PAIR, np.uint64(i), np.uint64(j))
    return u2(base, _P_PAIR, np.uint64(j), np.uint64(i))


def pair_uniform(ctx: SeedContext, i: int, j: int) -> float:
    """Symmetric per-pair uniform keyed by the unordered pair ``{i, j}``."""
    if i == j:
        raise ValueError("pair_uniform needs two distinct vertices")
    return float(pair_leaf(ctx.key, np.int64(i), np.int64(j)))
