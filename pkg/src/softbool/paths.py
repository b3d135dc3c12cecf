"""Mark sequences along paths: local maxima, skeletons and shortcut-freeness.

Marks are compared with ties broken by index (the lower index counts as
the smaller mark), which makes every removal order deterministic.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "MarkPath",
    "SkeletonDecomposition",
    "is_local_maximum",
    "skeleton",
    "skeleton_bruteforce",
    "is_shortcut_free",
    "shortcut_free_bruteforce",
]


@dataclass(frozen=True)
class MarkPath:
    """Marks ``u_0..u_n`` of the vertices ``x_0..x_n`` of a path."""

    marks: tuple
    ids: Optional[tuple] = None

    def __init__(self, marks: Sequence[float], ids: Optional[Sequence[int]] = None):
        m = tuple(float(v) for v in marks)
        if len(m) < 2:
            raise ValueError("a path has at least two vertices")
        if ids is not None and len(ids) != len(m):
            raise ValueError("ids and marks differ in length")
        object.__setattr__(self, "marks", m)
        object.__setattr__(self, "ids", None if ids is None else tuple(ids))

    def __len__(self) -> int:
        return len(self.marks)

    def key(self, i: int) -> tuple:
        return (self.marks[i], i)


@dataclass(frozen=True)
class SkeletonDecomposition:
    skeleton_indices: tuple
    connector_segments: tuple  # one tuple of removed indices per skeleton gap
    removal_order: tuple = field(default=())

    def skeleton_marks(self, path: MarkPath) -> list:
        return [path.marks[i] for i in self.skeleton_indices]


def _as_path(path) -> MarkPath:
    return path if isinstance(path, MarkPath) else MarkPath(path)


def is_local_maximum(path, i: int) -> bool:
    """Whether interior vertex ``i`` beats both neighbours."""
    p = _as_path(path)
    if not 0 < i < len(p) - 1:
        raise IndexError("endpoints are never local maxima")
    return p.key(i) > p.key(i - 1) and p.key(i) > p.key(i + 1)


def skeleton(path) -> SkeletonDecomposition:
    """Remove local maxima one at a time, largest mark first.

    After each removal the two neighbours become adjacent, which may create
    a new local maximum.  Runs in ``O(n log n)`` with a linked list and a
    max-heap of current local maxima.
    """
    p = _as_path(path)
    n = len(p)
    prev = list(range(-1, n - 1))
    nxt = list(range(1, n + 1))
    alive = [True] * n
    keys = [p.key(i) for i in range(n)]

    def is_max(i):
        return 0 < i < n - 1 and prev[i] >= 0 and nxt[i] < n and \
            keys[i] > keys[prev[i]] and keys[i] > keys[nxt[i]]

    heap = [(-keys[i][0], -i) for i in range(1, n - 1) if is_max(i)]
    heapq.heapify(heap)
    order = []
    while heap:
        _, ni = heapq.heappop(heap)
        i = -ni
        if not alive[i] or not is_max(i):
            continue
        alive[i] = False
        order.append(i)
        a, b = prev[i], nxt[i]
        nxt[a] = b
        prev[b] = a
        for j in (a, b):
            if is_max(j):
                heapq.heappush(heap, (-keys[j][0], -j))
    sk = tuple(i for i in range(n) if alive[i])
    segs = tuple(tuple(range(sk[k] + 1, sk[k + 1])) for k in range(len(sk) - 1))
    return SkeletonDecomposition(sk, segs, tuple(order))


def skeleton_bruteforce(path) -> SkeletonDecomposition:
    """Direct simulation of the removal rule in ``O(n**2)`` (test oracle)."""
    p = _as_path(path)
    cur = list(range(len(p)))
    order = []
    while True:
        cands = [cur[k] for k in range(1, len(cur) - 1)
                 if p.key(cur[k]) > p.key(cur[k - 1]) and p.key(cur[k]) > p.key(cur[k + 1])]
        if not cands:
            break
        top = max(cands, key=p.key)
        order.append(top)
        cur.remove(top)
    segs = tuple(tuple(range(cur[k] + 1, cur[k + 1])) for k in range(len(cur) - 1))
    return SkeletonDecomposition(tuple(cur), segs, tuple(order))


def is_shortcut_free(path_ids: Sequence[int], adjacent: Callable[[int, int], bool]) -> bool:
    """True iff no edge joins two non-consecutive vertices of the path."""
    ids = list(path_ids)
    n = len(ids)
    for a in range(n):
        for b in range(a + 2, n):
            if adjacent(ids[a], ids[b]):
                return False
    return True


def shortcut_free_bruteforce(path_ids: Sequence[int], adjacent: Callable[[int, int], bool]) -> bool:
    """Oracle: the path is a shortest ``x_0``-``x_n`` path among its own vertices."""
    ids = list(path_ids)
    n = len(ids)
    if n <= 2:
        return True
    adj = np.zeros((n, n), dtype=bool)
    for a in range(n):
        for b in range(a + 1, n):
            adj[a, b] = adj[b, a] = bool(adjacent(ids[a], ids[b]))
    dist = np.full(n, -1)
    dist[0] = 0
    frontier = [0]
    while frontier:
        new = []
        for v in frontier:
            for w in np.nonzero(adj[v])[0]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    new.append(int(w))
        frontier = new
    return dist[n - 1] == n - 1
