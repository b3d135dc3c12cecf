"""Octave-by-octave slopes of a diameter, size or degree survival curve.

Useful for choosing fit windows: a pure power law gives flat local slopes,
while finite-size effects or a crossover show up as drift.
"""

import argparse
import math

from softbool.estimate import fit_tail, run_cluster_experiment, run_degree_experiment
from softbool.model import ModelParams, predict


def local_slopes(curve, lo=4.0):
    s = curve.lower_survival
    g = curve.grid
    rows = []
    for k in range(0, len(g) - 4, 4):
        if g[k] < lo or s[k + 4] == 0:
            continue
        rows.append((g[k], g[k + 4], -math.log(s[k + 4] / s[k]) / math.log(g[k + 4] / g[k]),
                     int(curve.lower_counts[k + 4])))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("statistic", choices=("diameter", "size", "degree"))
    ap.add_argument("--beta", type=float, required=True)
    ap.add_argument("--gamma", type=float, required=True)
    ap.add_argument("--alpha", type=float, default=0.0)
    ap.add_argument("--delta", type=float, default=2.0)
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--box-side", type=float, default=2.0e4)
    ap.add_argument("--trials", type=int, default=10**5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--window", type=float, nargs=2)
    a = ap.parse_args()

    p = ModelParams(a.beta, a.gamma, a.alpha, a.delta, a.dim)
    pred = predict(p)
    if a.statistic == "degree":
        curve = run_degree_experiment(p, a.box_side, a.trials, a.seed, workers=a.workers)
        target = 1 / a.gamma if a.gamma else None
    else:
        d, s = run_cluster_experiment(p, a.box_side, a.trials, a.seed, workers=a.workers)
        curve = d if a.statistic == "diameter" else s
        target = pred.diameter_exponent if a.statistic == "diameter" else pred.size_exponent
        print(f"censored {curve.meta['censored']}, mean size {curve.meta['mean_size']:.3f}")
    print(f"regime {pred.regime}, target {target}")
    print(f"{'from':>10} {'to':>10} {'slope':>7} {'events':>8}")
    for lo, hi, sl, n in local_slopes(curve):
        print(f"{lo:10.1f} {hi:10.1f} {sl:7.3f} {n:8d}")
    if a.window:
        f = fit_tail(curve, a.window)
        print(f"fit {f.exponent:.3f} +- {f.stderr:.3f}, hill {f.cross_check['exponent']:.3f}, "
              f"warnings {f.warnings}")


if __name__ == "__main__":
    main()
