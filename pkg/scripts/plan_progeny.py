"""Exact total-progeny survival of the dominating branching process.

Descendant offspring are mixed Poisson with mean ``beta*c_mix*W`` where
``P(W > w) = w**(1-1/gamma)``; the root uses ``W = U**-gamma``.  Tree sizes
follow from the hitting-time identity ``P(C = k) = P(S_k = k-1)/k`` and the
root's progeny from composing generating functions.  Prints the expected
log-log slope over candidate windows so experiment settings can be chosen
before spending Monte Carlo time.
"""

import argparse
import math

import numpy as np
from scipy import integrate, special, stats

from softbool.branching import BranchingParams
from softbool.estimate import GRID_M0, GRID_RATIO, loglog_slope, make_grid


def mixed_poisson_law(mean_scale, tail_index, K):
    """``P(Z = j)``, ``j < K``, for Poisson(mean_scale * W) with ``P(W > w) = w**-tail_index``."""
    a, c = tail_index, mean_scale
    p = np.empty(K)
    for j in range(K):
        if j - a > 0.5:
            # a c**a Gamma(j - a, c) / j!
            p[j] = math.exp(math.log(a) + a * math.log(c) + special.gammaln(j - a)
                            + math.log(special.gammaincc(j - a, c)) - special.gammaln(j + 1))
        else:
            f = lambda w: a * w ** (-a - 1.0) * stats.poisson.pmf(j, c * w)
            p[j] = integrate.quad(f, 1.0, np.inf, limit=400)[0]
    return p


def series_mul(a, b, K):
    n = 1 << int(math.ceil(math.log2(2 * K)))
    return np.fft.irfft(np.fft.rfft(a, n) * np.fft.rfft(b, n), n)[:K]


def progeny_survival(bp: BranchingParams, K: int):
    bc = bp.beta * bp.c_mix
    g = bp.gamma
    p = mixed_poisson_law(bc, 1.0 / g - 1.0, K)
    q = mixed_poisson_law(bc, 1.0 / g, K)
    # descendant tree sizes, self included
    f = np.zeros(K)
    power = np.zeros(K)
    power[0] = 1.0
    for k in range(1, K):
        power = series_mul(power, p, K)
        f[k] = power[k - 1] / k
    f = np.clip(f, 0.0, None)
    # root progeny (root excluded): sum_j q_j F(s)**j
    law = np.zeros(K)
    fj = np.zeros(K)
    fj[0] = 1.0
    for j in range(K):
        law += q[j] * fj
        fj = np.clip(series_mul(fj, f, K), 0.0, None)
    sf = 1.0 - np.cumsum(law)  # P(T > n)
    return sf


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma", type=float, default=0.25)
    ap.add_argument("--delta", type=float, default=2.0)
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--betas", type=float, nargs="+", default=[0.02, 0.04, 0.06, 0.08])
    ap.add_argument("--kmax", type=int, default=1200)
    args = ap.parse_args(argv)
    grid = make_grid(GRID_M0, GRID_RATIO, args.kmax)
    grid = grid[grid < args.kmax - 1]
    windows = [(10, 100), (16, 100), (16, 300), (32, 300), (10, 1000)]
    for b in args.betas:
        bp = BranchingParams(b, args.gamma, args.delta, args.dim)
        sf = progeny_survival(bp, args.kmax)
        S = np.array([sf[int(math.floor(m))] for m in grid])
        print(f"beta={b} mean_offspring={bp.mean_offspring:.3f} target={1 / args.gamma - 1:.3f}")
        for lo, hi in windows:
            sel = (grid >= lo) & (grid <= hi)
            if sel.sum() >= 2 and np.all(S[sel] > 0):
                top = S[sel][-1]
                print(f"  window [{lo},{hi}] slope={loglog_slope(grid[sel], S[sel]):.3f} "
                      f"S(top)={top:.3g} trials_for_100={100 / top:.3g}")


if __name__ == "__main__":
    main()
