"""Marked Poisson point clouds in a centred box, with an optional Palm origin.

A cloud sampled here is the fully materialized form of the lazy realization
used by the simulation drivers: for the same :class:`SeedContext` it holds
exactly the points that the lazy engine would generate on demand.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import _tree as tr
from .randomness import Purpose, SeedContext, stream_uniform

__all__ = [
    "MarkedPoint",
    "PointCloud",
    "sample_cloud",
    "add_palm_origin",
    "make_cloud",
    "write_cloud_csv",
]


@dataclass(frozen=True)
class MarkedPoint:
    id: int
    position: tuple
    mark: float


class PointCloud:
    """Immutable marked point cloud in ``[-L/2, L/2]**dim``.

    Non-origin points are stored as arrays sorted by tree leaf and rank; the
    origin (id 0, at the zero vector) is kept separately.

    Parameters
    ----------
    box_side, dim : float, int
        Box geometry.
    ids, positions, marks : arrays
        Non-origin points.  Ids must be unique and positive.
    leaf, rank : arrays
        Leaf node and rank within the leaf in the spatial tree of depth
        ``depth``.  They determine how edge marks are realized.
    has_origin : bool
    origin_mark : float or None
    ctx : SeedContext or None
        Realization the cloud came from, if sampled.
    """

    def __init__(self, box_side, dim, ids, positions, marks, leaf, rank, depth,
                 has_origin=False, origin_mark=None, ctx=None):
        self.box_side = float(box_side)
        self.dim = int(dim)
        self.ids = np.asarray(ids, dtype=np.int64)
        self.positions = np.asarray(positions, dtype=float).reshape(-1, self.dim)
        self.marks = np.asarray(marks, dtype=float)
        self.leaf = np.asarray(leaf, dtype=np.int64)
        self.rank = np.asarray(rank, dtype=np.int64)
        self.depth = int(depth)
        self.has_origin = bool(has_origin)
        self.origin_mark = None if origin_mark is None else float(origin_mark)
        self.ctx = ctx
        for a in (self.ids, self.positions, self.marks, self.leaf, self.rank):
            a.setflags(write=False)
        self._index = None
        self._tree = None

    # -- container protocol
    def __len__(self) -> int:
        return len(self.ids) + int(self.has_origin)

    @property
    def n_points(self) -> int:
        """Number of Poisson points (origin excluded)."""
        return len(self.ids)

    @property
    def points(self) -> list:
        out = []
        if self.has_origin:
            out.append(MarkedPoint(0, (0.0,) * self.dim, self.origin_mark))
        for i, x, u in zip(self.ids, self.positions, self.marks):
            out.append(MarkedPoint(int(i), tuple(float(v) for v in x), float(u)))
        return out

    def index_of(self, vid: int) -> int:
        """Row of vertex ``vid``; the origin maps to ``-1``."""
        if vid == 0:
            if not self.has_origin:
                raise KeyError("cloud has no origin")
            return -1
        if self._index is None:
            self._index = {int(v): k for k, v in enumerate(self.ids)}
        try:
            return self._index[int(vid)]
        except KeyError:
            raise KeyError(f"unknown vertex id {vid}") from None

    def id_of(self, row: int) -> int:
        return 0 if row < 0 else int(self.ids[row])

    def position_of(self, vid: int) -> np.ndarray:
        k = self.index_of(vid)
        return np.zeros(self.dim) if k < 0 else self.positions[k]

    def mark_of(self, vid: int) -> float:
        k = self.index_of(vid)
        return self.origin_mark if k < 0 else float(self.marks[k])

    def tree(self) -> tr.Tree:
        """Spatial index over the cloud (built once, then reused)."""
        if self._tree is None:
            n = len(self.ids)
            T = tr.new_tree(self.box_side, self.dim, max(n, 1), self.depth)
            tr.load_explicit(T, self.positions, self.marks, self.ids, self.leaf, self.rank)
            T.st[tr.ST_HAS_ORIGIN] = int(self.has_origin)
            T.fs[tr.FS_ORIGIN_MARK] = self.origin_mark if self.has_origin else 0.5
            self._tree = T
        return self._tree

    def __repr__(self) -> str:
        return (f"PointCloud(L={self.box_side}, dim={self.dim}, n={self.n_points}, "
                f"origin={self.has_origin})")


def sample_cloud(ctx: SeedContext, box_side: float, dim: int) -> PointCloud:
    """Poisson(``L**dim``) points with uniform positions and marks.

    Fully determined by ``ctx``.
    """
    if not box_side > 0:
        raise ValueError("box_side must be positive")
    T = tr.new_tree(box_side, dim, tr.lazy_capacity(box_side, dim))
    base = ctx.key
    tr.begin_trial(T, base, 0.5, 0)
    if T.st[tr.ST_OVERFLOW]:
        raise RuntimeError("point count exceeded the arena; increase capacity")
    tr.materialize_all(T, base)
    n = int(T.st[tr.ST_FILL])
    return PointCloud(
        box_side, dim, T.ids[:n].copy(), T.pos[:n].copy(), T.mark[:n].copy(),
        T.leaf[:n].copy(), T.rank[:n].copy(), int(T.st[tr.ST_DEPTH]), ctx=ctx,
    )


def add_palm_origin(cloud: PointCloud, origin_mark: Union[float, str] = "random",
                    ctx: Optional[SeedContext] = None) -> PointCloud:
    """Return a copy of ``cloud`` with the typical vertex (id 0) at the origin.

    ``origin_mark`` is either a fixed mark in (0, 1) or ``"random"``, which
    draws it from the realization's own stream.
    """
    if cloud.has_origin:
        raise ValueError("cloud already has a Palm origin")
    ctx = ctx if ctx is not None else cloud.ctx
    if origin_mark == "random":
        if ctx is None:
            raise ValueError("a random origin mark needs a SeedContext")
        u = stream_uniform(ctx, Purpose.ORIGIN_MARK, 0)
    else:
        u = float(origin_mark)
        if not 0.0 < u < 1.0:
            raise ValueError("origin mark must lie in (0, 1)")
    return PointCloud(cloud.box_side, cloud.dim, cloud.ids, cloud.positions, cloud.marks,
                      cloud.leaf, cloud.rank, cloud.depth, True, u, ctx)


def make_cloud(positions, marks, box_side: float, ids: Optional[Sequence[int]] = None,
               origin_mark: Optional[float] = None, depth: Optional[int] = None) -> PointCloud:
    """Build a cloud from explicit data (tests, imported point sets).

    Parameters
    ----------
    positions : array_like, shape (n, dim)
    marks : array_like, shape (n,)
    box_side : float
    ids : sequence of int, optional
        Unique positive ids; defaults to ``1..n``.
    origin_mark : float, optional
        Adds the Palm origin with this mark.
    depth : int, optional
        Tree depth; defaults to the depth used for sampled clouds.
    """
    pos = np.asarray(positions, dtype=float)
    if pos.ndim == 1:
        pos = pos.reshape(-1, 1)
    dim = pos.shape[1]
    marks = np.asarray(marks, dtype=float).ravel()
    n = pos.shape[0]
    if marks.shape[0] != n:
        raise ValueError("positions and marks differ in length")
    ids = np.arange(1, n + 1, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
    if len(set(ids.tolist())) != n or (n and ids.min() <= 0):
        raise ValueError("ids must be unique positive integers (0 is the origin)")
    if n and np.any(np.abs(pos) > box_side / 2):
        raise ValueError("positions must lie in the box")
    if n and np.any((marks <= 0) | (marks >= 1)):
        raise ValueError("marks must lie in (0, 1)")
    D = tr.default_depth(box_side, dim) if depth is None else int(depth)
    lo, hi = tr.make_geometry(float(box_side), dim, D)
    leaf = tr.assign_leaves(lo, hi, pos, D) if n else np.zeros(0, dtype=np.int64)
    order = np.lexsort((ids, leaf))
    leaf = leaf[order]
    rank = np.zeros(n, dtype=np.int64)
    for k in range(1, n):
        rank[k] = rank[k - 1] + 1 if leaf[k] == leaf[k - 1] else 0
    cloud = PointCloud(box_side, dim, ids[order], pos[order], marks[order], leaf, rank, D)
    if origin_mark is not None:
        cloud = add_palm_origin(cloud, origin_mark)
    return cloud


def write_cloud_csv(cloud: PointCloud, path) -> None:
    """Dump ``id,x1..xd,mark`` rows with round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id"] + [f"x{c + 1}" for c in range(cloud.dim)] + ["mark"])
        for p in cloud.points:
            w.writerow([p.id] + [repr(v) for v in p.position] + [repr(p.mark)])
