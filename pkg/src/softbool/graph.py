"""Connection rule, neighbour queries and cluster exploration.

All queries on a :class:`~softbool.pointcloud.PointCloud` go through its
spatial tree, and every edge mark comes from the tree's block construction
(see :mod:`softbool._tree`).  ``neighbors_fast`` prunes whole subtrees and
``neighbors_naive`` checks every vertex, but both evaluate identical
arithmetic, so their outputs are equal as sets.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from . import _tree as tr
from .model import ModelParams, degree_intensity_above, unit_ball_volume
from .pointcloud import PointCloud
from .randomness import SeedContext

__all__ = [
    "ClusterResult",
    "BoxTooSmallWarning",
    "edge_present",
    "edge_present_radius_form",
    "edge_mark",
    "neighbors_naive",
    "neighbors_fast",
    "explore_cluster",
    "origin_degree_above",
    "edge_list",
    "write_edges_csv",
    "outside_mass_fraction",
    "default_margin",
    "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 10**6


class BoxTooSmallWarning(UserWarning):
    """The box cuts off a noticeable part of the origin's neighbour intensity."""


@dataclass(frozen=True)
class ClusterResult:
    """Outcome of exploring the origin's cluster.

    ``size`` excludes the origin; ``diameter_pow_d`` is ``max |x|**d`` over
    the cluster; ``censored`` is set when the cluster reached the boundary
    margin or the budget.
    """

    size: int
    diameter_pow_d: float
    censored: bool
    edges_examined: int
    frontier_max: int


def pack_params(params: ModelParams) -> np.ndarray:
    return np.array([params.beta, params.gamma, params.alpha, params.delta], dtype=float)


def default_margin(box_side: float) -> float:
    return box_side / 8.0


def _tree_for(cloud: PointCloud, params: Optional[ModelParams] = None):
    if params is not None and params.dim != cloud.dim:
        raise ValueError(f"params.dim={params.dim} but cloud has dim {cloud.dim}")
    return cloud.tree()


def edge_mark(ctx: SeedContext, cloud: PointCloud, i: int, j: int) -> float:
    """The uniform edge mark ``V`` of the pair ``{i, j}`` in this realization."""
    if i == j:
        raise ValueError("an edge needs two distinct vertices")
    T = _tree_for(cloud)
    return float(tr.member_pair_mark(T, ctx.key, cloud.index_of(i), cloud.index_of(j)))


def edge_present(ctx: SeedContext, cloud: PointCloud, params: ModelParams, i: int, j: int) -> bool:
    """``V <= rho(kernel(u_i, u_j) |x_i - x_j|**d / beta)``."""
    if i == j:
        raise ValueError("an edge needs two distinct vertices")
    T = _tree_for(cloud, params)
    return bool(tr.edge_flag(T, ctx.key, pack_params(params),
                             cloud.index_of(i), cloud.index_of(j), False))


def edge_present_radius_form(ctx: SeedContext, cloud: PointCloud, params: ModelParams,
                             i: int, j: int) -> bool:
    """``|x_i - x_j|**d <= beta * W * max(R_i, R_j)`` with ``W = V**(-1/delta)``.

    For ``alpha > 0`` the radius factor generalizes to ``1 / kernel``.
    """
    if i == j:
        raise ValueError("an edge needs two distinct vertices")
    T = _tree_for(cloud, params)
    return bool(tr.edge_flag(T, ctx.key, pack_params(params),
                             cloud.index_of(i), cloud.index_of(j), True))


def _ids(cloud: PointCloud, T, k: int) -> list:
    rows = T.nbuf[:k]
    return [0 if r < 0 else int(cloud.ids[r]) for r in rows]


def neighbors_naive(ctx: SeedContext, cloud: PointCloud, params: ModelParams, i: int) -> list:
    """Neighbours of ``i`` by testing every other vertex."""
    T = _tree_for(cloud, params)
    k = tr.neighbors_naive(T, ctx.key, pack_params(params), cloud.index_of(i))
    return _ids(cloud, T, k)


def neighbors_fast(ctx: SeedContext, cloud: PointCloud, params: ModelParams, i: int) -> list:
    """Neighbours of ``i`` by tree search; equal as a set to the naive answer."""
    T = _tree_for(cloud, params)
    k = tr.neighbors_fast(T, ctx.key, pack_params(params), cloud.index_of(i))
    return _ids(cloud, T, k)


def explore_cluster(ctx: SeedContext, cloud: PointCloud, params: ModelParams,
                    margin: Optional[float] = None, budget: int = DEFAULT_BUDGET,
                    reverse: bool = False, naive: bool = False) -> ClusterResult:
    """Breadth-first search of the origin's cluster.

    Parameters
    ----------
    margin : float, optional
        Points within ``margin`` of the boundary censor the trial.
        Defaults to ``L/8``.
    budget : int
        Exploration stops, censored, once the cluster exceeds this size.
    reverse : bool
        Visit each adjacency list backwards (the result must not change).
    naive : bool
        Use the exhaustive neighbour query.
    """
    if not cloud.has_origin:
        raise ValueError("explore_cluster needs a cloud with a Palm origin")
    T = _tree_for(cloud, params)
    margin = default_margin(cloud.box_side) if margin is None else float(margin)
    r = tr.explore(T, ctx.key, pack_params(params), margin, int(budget), reverse, naive)
    return ClusterResult(int(r[0]), float(r[1]), bool(r[2]), int(r[3]), int(r[4]))


def outside_mass_fraction(params: ModelParams, box_side: float, u: float) -> float:
    """Fraction of the origin's above-``u`` neighbour intensity lying outside the box.

    Uses the inscribed ball of radius ``L/2``, so it is an upper bound.
    """
    b, g, de, d = params.beta, params.gamma, params.delta, params.dim
    total = degree_intensity_above(params, u)
    if total <= 0:
        return 0.0
    R = box_side / 2.0
    s = unit_ball_volume(d) * d

    def tail(t):
        # intensity of mark-t neighbours beyond radius R
        k = (min(u, t) ** g) * (max(u, t) ** params.alpha) / b
        r0 = k ** (-1.0 / d)  # hard-ball radius
        if R <= r0:
            inner = s * (r0**d - R**d) / d
            out = s * k ** (-de) * r0 ** (d - d * de) / (d * de - d)
            return inner + out
        return s * k ** (-de) * R ** (d - d * de) / (d * de - d)

    val, _ = integrate.quad(tail, u, 1.0, limit=200)
    return val / total


def origin_degree_above(ctx: SeedContext, cloud: PointCloud, params: ModelParams,
                        u: float, tol: float = 0.01) -> int:
    """Number of origin neighbours with mark above ``u``.

    Warns with :class:`BoxTooSmallWarning` when the box truncates more than
    ``tol`` of the expected count.
    """
    if not cloud.has_origin or abs(cloud.origin_mark - u) > 0:
        raise ValueError("cloud origin must carry the fixed mark u")
    frac = outside_mass_fraction(params, cloud.box_side, u)
    if frac > tol:
        warnings.warn(f"box truncates {frac:.2%} of the neighbour intensity", BoxTooSmallWarning)
    T = _tree_for(cloud, params)
    k = tr.neighbors_fast(T, ctx.key, pack_params(params), -1)
    rows = T.nbuf[:k]
    return int(np.sum(cloud.marks[rows] > u))


def edge_list(ctx: SeedContext, cloud: PointCloud, params: ModelParams) -> list:
    """All edges ``(i, j)`` with ``i < j`` (ids), for small clouds."""
    T = _tree_for(cloud, params)
    pp = pack_params(params)
    base = ctx.key
    out = []
    rows = ([-1] if cloud.has_origin else []) + list(range(cloud.n_points))
    for a in rows:
        k = tr.neighbors_fast(T, base, pp, a)
        ia = cloud.id_of(a)
        for b in T.nbuf[:k]:
            ib = cloud.id_of(int(b))
            if ia < ib:
                out.append((ia, ib))
    out.sort()
    return out


def write_edges_csv(edges, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j"])
        w.writerows(edges)
