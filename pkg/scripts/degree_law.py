"""Origin degree above the origin's mark against the Poisson intensity.

Compares the empirical mean and variance of the number of neighbours with
mark above ``u`` with the closed-form intensity from
``degree_intensity_above`` and with any values passed to ``--compare``.
"""

import argparse
import math

from softbool.estimate import degree_batch
from softbool.model import ModelParams, degree_intensity_above
from softbool.validation import _poisson_gof


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--beta", type=float, default=0.1)
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--delta", type=float, default=2.0)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--u", type=float, default=0.25)
    ap.add_argument("--box-side", type=float, default=20.0)
    ap.add_argument("--trials", type=int, default=10**5)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--compare", type=float, nargs="*", default=[0.2 * math.pi])
    a = ap.parse_args()

    p = ModelParams(a.beta, a.gamma, 0.0, a.delta, a.dim)
    _, x = degree_batch(p, a.box_side, a.seed, 0, a.trials, origin_mark=a.u, u_above=a.u)
    mean, var = x.mean(), x.var(ddof=1)
    print(f"trials {a.trials}: mean {mean:.4f} +- {x.std() / math.sqrt(len(x)):.4f}, var {var:.4f}")
    for lam in [degree_intensity_above(p, a.u)] + list(a.compare):
        z = (mean - lam) / math.sqrt(lam / len(x))
        print(f"lambda {lam:.4f}: z(mean) {z:+.1f}, chi2 p {_poisson_gof(x, lam):.3g}")


if __name__ == "__main__":
    main()
