"""Lazily realized k-d tree holding one realization of the marked Poisson
process and of its independent edge marks.

Point process
    The box is split at midpoints, cycling through the axes, down to depth
    ``D``.  The root count is Poisson(volume); each split sends every point
    left independently with probability 1/2.  Each node also knows the
    minimum mark of its points: given ``n`` iid uniform marks with minimum
    ``m``, the child holding the minimum is picked with probability
    proportional to its count and the other child's minimum is
    ``m + (1 - m) * Beta(1, n_other)``.  Leaf members are materialized only
    when a query touches the leaf.

Edge marks
    The iid pair uniforms ``V`` are organised the same way.  A block is the
    set of pairs between two tree nodes at one level (or within one node, or
    between the origin and one node).  Each block stores the minimum of its
    pair marks; children of a block inherit it through the same
    argmin-then-Beta construction.  At the leaves the pairs are ranked; the
    argmin rank gets the block minimum and every other pair gets an
    independent uniform on (minimum, 1) keyed by its two vertex ids.
    Knowing block minima lets a query discard a whole subtree as soon as the
    block minimum exceeds the largest edge probability any pair in it could
    have.  Naive and accelerated queries compute every ``V`` through the same
    functions, so they agree bit for bit.
"""

from __future__ import annotations

import math
from collections import namedtuple

import numpy as np
from numba import njit

from .randomness import (
    Purpose,
    absorb,
    binomial_keyed,
    clamp_open,
    min_of_uniforms,
    pair_leaf,
    poisson_keyed,
    trial_key,
    u1,
    u2,
    u3,
)

LEAF_VOLUME = 8.0
MAX_DEPTH = 24
RANK_BITS = 20
SLACK = 1e-9
NO_BLOCK = 2.0  # minimum of an empty block: larger than any probability

# state slots
ST_STAMP = 0
ST_FILL = 1
ST_EXPLICIT = 2
ST_EDGES = 3
ST_DEPTH = 4
ST_DIM = 5
ST_HAS_ORIGIN = 6
ST_OVERFLOW = 7
ST_N = 8
ST_VSTAMP = 9
# float state slots
FS_L = 0
FS_ORIGIN_MARK = 1

# stack entry kinds
K_DIAG = 0
K_OFF = 1
K_FULL = 2
K_ORIG = 3

P_COUNT = np.uint64(Purpose.COUNT)
P_ROOT = np.uint64(Purpose.ROOT_COUNT)
P_MINMARK = np.uint64(Purpose.MINMARK)
P_SPLIT = np.uint64(Purpose.SPLIT)
P_POS = np.uint64(Purpose.POSITION)
P_MARK = np.uint64(Purpose.MARK)
P_BMIN = np.uint64(Purpose.BLOCK_MIN)
P_BARG = np.uint64(Purpose.BLOCK_ARG)
P_PARG = np.uint64(Purpose.PAIR_ARG)
P_OMARK = np.uint64(Purpose.ORIGIN_MARK)
P_OBMIN = np.uint64(Purpose.ORIGIN_BLOCK_MIN)
P_OBARG = np.uint64(Purpose.ORIGIN_BLOCK_ARG)
P_OPARG = np.uint64(Purpose.ORIGIN_PAIR_ARG)

Tree = namedtuple(
    "Tree",
    [
        "lo", "hi",  # node boxes (nnode, d)
        "cnt", "nmin", "nstamp",  # node count, min mark, realization stamp
        "lstart", "lstamp",  # leaf arena offset, materialization stamp
        "pos", "mark", "ids", "leaf", "rank", "vis",  # arena
        "st", "fs",  # int / float state
        "stk_i", "stk_f",  # DFS stack
        "nbuf", "queue",  # neighbour buffer, BFS queue
    ],
)


def default_depth(box_side: float, dim: int) -> int:
    vol = float(box_side) ** dim
    if vol <= LEAF_VOLUME:
        return 0
    return int(min(MAX_DEPTH, math.ceil(math.log2(vol / LEAF_VOLUME))))


@njit(cache=True)
def make_geometry(L, d, D):
    nn = 1 << (D + 1)
    lo = np.zeros((nn, d))
    hi = np.zeros((nn, d))
    for c in range(d):
        lo[1, c] = -0.5 * L
        hi[1, c] = 0.5 * L
    level = 0
    for node in range(1, 1 << D):
        if node >= (1 << (level + 1)):
            level += 1
        ax = level % d
        mid = 0.5 * (lo[node, ax] + hi[node, ax])
        for k in range(2):
            ch = 2 * node + k
            for c in range(d):
                lo[ch, c] = lo[node, c]
                hi[ch, c] = hi[node, c]
        hi[2 * node, ax] = mid
        lo[2 * node + 1, ax] = mid
    return lo, hi


def new_tree(box_side: float, dim: int, capacity: int, depth: int | None = None) -> Tree:
    D = default_depth(box_side, dim) if depth is None else int(depth)
    lo, hi = make_geometry(float(box_side), int(dim), D)
    nn = 1 << (D + 1)
    cap = int(capacity)
    st = np.zeros(16, dtype=np.int64)
    st[ST_DEPTH] = D
    st[ST_DIM] = dim
    fs = np.zeros(4)
    fs[FS_L] = box_side
    scap = 8 * (D + 4)
    return Tree(
        lo, hi,
        np.zeros(nn, dtype=np.int64), np.ones(nn), np.full(nn, -1, dtype=np.int64),
        np.zeros(nn, dtype=np.int64), np.full(nn, -1, dtype=np.int64),
        np.zeros((cap, dim)), np.zeros(cap), np.zeros(cap, dtype=np.int64),
        np.zeros(cap, dtype=np.int64), np.zeros(cap, dtype=np.int64),
        np.full(cap, -1, dtype=np.int64),
        st, fs,
        np.zeros((scap, 3), dtype=np.int64), np.zeros(scap),
        np.zeros(cap + 1, dtype=np.int64), np.zeros(cap + 1, dtype=np.int64),
    )


def lazy_capacity(box_side: float, dim: int) -> int:
    """Arena size that a Poisson(volume) count exceeds with negligible probability."""
    vol = float(box_side) ** dim
    return int(vol + 12.0 * math.sqrt(vol) + 64)


# -- realization -----------------------------------------------------------


@njit(cache=True)
def begin_trial(T, base, origin_mark, has_origin):
    """Start a fresh lazy realization keyed by ``base``."""
    st = T.st
    st[ST_STAMP] += 1
    st[ST_VSTAMP] += 1
    st[ST_FILL] = 0
    st[ST_EDGES] = 0
    st[ST_OVERFLOW] = 0
    vol = T.fs[FS_L] ** st[ST_DIM]
    n = poisson_keyed(absorb(absorb(base, P_ROOT), np.uint64(0)), vol)
    st[ST_N] = n
    if n > T.pos.shape[0]:
        st[ST_OVERFLOW] = 1
    T.cnt[1] = n
    T.nmin[1] = min_of_uniforms(u1(base, P_MINMARK, np.uint64(1)), n) if n > 0 else 1.0
    T.nstamp[1] = st[ST_STAMP]
    st[ST_HAS_ORIGIN] = has_origin
    if origin_mark > 0.0:
        T.fs[FS_ORIGIN_MARK] = origin_mark
    else:
        T.fs[FS_ORIGIN_MARK] = u1(base, P_OMARK, np.uint64(0))


@njit(cache=True)
def split_node(cnt, nmin, nstamp, stamp, base, node):
    """Realize the counts and minimum marks of both children of ``node``."""
    c = 2 * node
    n = cnt[node]
    if n == 0:
        cnt[c] = 0
        cnt[c + 1] = 0
        nmin[c] = 1.0
        nmin[c + 1] = 1.0
    else:
        nl = binomial_keyed(absorb(absorb(base, P_COUNT), np.uint64(node)), n, 0.5)
        nr = n - nl
        cnt[c] = nl
        cnt[c + 1] = nr
        m = nmin[node]
        if u1(base, P_SPLIT, np.uint64(node)) * n < nl:
            keep, other, no = c, c + 1, nr
        else:
            keep, other, no = c + 1, c, nl
        nmin[keep] = m
        if no > 0:
            b = min_of_uniforms(u1(base, P_MINMARK, np.uint64(other)), no)
            nmin[other] = clamp_open(m + (1.0 - m) * b)
        else:
            nmin[other] = 1.0
    nstamp[c] = stamp
    nstamp[c + 1] = stamp


@njit(cache=True)
def fill_leaf(T, base, leaf):
    """Materialize the members of ``leaf`` into the arena."""
    st = T.st
    n = T.cnt[leaf]
    start = st[ST_FILL]
    if start + n > T.pos.shape[0]:
        st[ST_OVERFLOW] = 1
        n = T.pos.shape[0] - start
    d = st[ST_DIM]
    D = st[ST_DEPTH]
    m = T.nmin[leaf]
    li = np.int64(leaf - (1 << D))
    for k in range(n):
        a = start + k
        if k == 0:
            T.mark[a] = m
        else:
            T.mark[a] = clamp_open(m + (1.0 - m) * u2(base, P_MARK, np.uint64(leaf), np.uint64(k)))
        for c in range(d):
            w = T.hi[leaf, c] - T.lo[leaf, c]
            T.pos[a, c] = T.lo[leaf, c] + w * u3(base, P_POS, np.uint64(leaf), np.uint64(k), np.uint64(c))
        T.ids[a] = (li << RANK_BITS) + k + 1
        T.leaf[a] = leaf
        T.rank[a] = k
    T.lstart[leaf] = start
    T.lstamp[leaf] = st[ST_STAMP]
    st[ST_FILL] = start + n


@njit(cache=True)
def ensure_children(T, base, node):
    if T.st[ST_EXPLICIT] == 0 and T.nstamp[2 * node] != T.st[ST_STAMP]:
        split_node(T.cnt, T.nmin, T.nstamp, T.st[ST_STAMP], base, node)


@njit(cache=True)
def ensure_leaf(T, base, leaf):
    if T.st[ST_EXPLICIT] == 0 and T.lstamp[leaf] != T.st[ST_STAMP]:
        fill_leaf(T, base, leaf)


@njit(cache=True)
def materialize_all(T, base):
    """Realize every leaf (used for dumps and for the naive oracle)."""
    D = T.st[ST_DEPTH]
    for node in range(1, 1 << D):
        ensure_children(T, base, node)
    for leaf in range(1 << D, 1 << (D + 1)):
        if T.cnt[leaf] > 0:
            ensure_leaf(T, base, leaf)


# -- block minima ----------------------------------------------------------
# Scalar helpers only: passing the Tree tuple into a non-inlined call costs
# a reference-count round trip per array, which dominated the query time.


@njit(cache=True)
def _pick4(u, s0, s1, s2, s3):
    t = u * (s0 + s1 + s2 + s3)
    if t < s0:
        return 0
    t -= s0
    if t < s1 or (s2 == 0.0 and s3 == 0.0):
        return 1 if s1 > 0.0 else 0
    t -= s1
    if t < s2 or s3 == 0.0:
        return 2 if s2 > 0.0 else (1 if s1 > 0.0 else 0)
    return 3


@njit(cache=True)
def _below(M, u, k):
    return clamp_open(M + (1.0 - M) * min_of_uniforms(u, k))


@njit(cache=True)
def root_diag_min(base, n):
    if n < 2:
        return NO_BLOCK
    return min_of_uniforms(u2(base, P_BMIN, np.uint64(1), np.uint64(1)), 0.5 * n * (n - 1.0))


@njit(cache=True)
def root_origin_min(base, n):
    if n < 1:
        return NO_BLOCK
    return min_of_uniforms(u1(base, P_OBMIN, np.uint64(1)), float(n))


@njit(cache=True)
def child_min_diag(base, X, M, which, c0, c1):
    """Child of the within-node block (X, X): 0=(X0,X0), 1=(X0,X1), 2=(X1,X1)."""
    if M >= NO_BLOCK:
        return NO_BLOCK
    n0 = float(c0)
    n1 = float(c1)
    s0 = 0.5 * n0 * (n0 - 1.0)
    s1 = n0 * n1
    s2 = 0.5 * n1 * (n1 - 1.0)
    if which == 0:
        sw = s0
    elif which == 1:
        sw = s1
    else:
        sw = s2
    if sw <= 0.0:
        return NO_BLOCK
    arg = _pick4(u2(base, P_BARG, np.uint64(X), np.uint64(X)), s0, s1, s2, 0.0)
    if arg == which:
        return M
    a = 2 * X + (1 if which == 2 else 0)
    b = 2 * X + (0 if which == 0 else 1)
    return _below(M, u2(base, P_BMIN, np.uint64(a), np.uint64(b)), sw)


@njit(cache=True)
def child_min_off(base, lo, hi, M, a, b, l0, l1, h0, h1):
    """Child (lo_a, hi_b) of the block between distinct nodes ``lo < hi``."""
    if M >= NO_BLOCK:
        return NO_BLOCK
    s0 = float(l0) * h0
    s1 = float(l0) * h1
    s2 = float(l1) * h0
    s3 = float(l1) * h1
    c = 2 * a + b
    if c == 0:
        sw = s0
    elif c == 1:
        sw = s1
    elif c == 2:
        sw = s2
    else:
        sw = s3
    if sw <= 0.0:
        return NO_BLOCK
    arg = _pick4(u2(base, P_BARG, np.uint64(lo), np.uint64(hi)), s0, s1, s2, s3)
    if arg == c:
        return M
    return _below(M, u2(base, P_BMIN, np.uint64(2 * lo + a), np.uint64(2 * hi + b)), sw)


@njit(cache=True)
def child_min_origin(base, Y, M, b, c0, c1):
    if M >= NO_BLOCK:
        return NO_BLOCK
    n0 = float(c0)
    n1 = float(c1)
    sw = n0 if b == 0 else n1
    if sw <= 0.0:
        return NO_BLOCK
    if n0 == 0.0:
        arg = 1
    elif n1 == 0.0:
        arg = 0
    else:
        arg = 0 if u1(base, P_OBARG, np.uint64(Y)) * (n0 + n1) < n0 else 1
    if arg == b:
        return M
    return _below(M, u1(base, P_OBMIN, np.uint64(2 * Y + b)), sw)


@njit(cache=True)
def _leaf_v(M, u_arg, K, r, base, ia, ib):
    rs = np.int64(u_arg * K)
    if rs >= K:
        rs = np.int64(K) - 1
    if r == rs:
        return M
    return clamp_open(M + (1.0 - M) * pair_leaf(base, ia, ib))


@njit(cache=True)
def v_leaf_diag(base, A, M, n, ka, kb, ida, idb):
    K = n * (n - 1) // 2
    if ka < kb:
        r = kb * (kb - 1) // 2 + ka
    else:
        r = ka * (ka - 1) // 2 + kb
    u = u2(base, P_PARG, np.uint64(A), np.uint64(A))
    return _leaf_v(M, u, K, r, base, ida, idb)


@njit(cache=True)
def v_leaf_off(base, lo, hi, M, nlo, nhi, klo, khi, idlo, idhi):
    u = u2(base, P_PARG, np.uint64(lo), np.uint64(hi))
    return _leaf_v(M, u, nlo * nhi, klo * nhi + khi, base, idlo, idhi)


@njit(cache=True)
def v_leaf_origin(base, B, M, n, k, idb):
    u = u1(base, P_OPARG, np.uint64(B))
    return _leaf_v(M, u, n, k, base, np.int64(0), idb)


@njit(cache=True)
def pair_mark(cnt, base, D, A, B, ka, kb, ida, idb):
    """Edge mark between two realized members by a root-to-leaf walk.

    ``A, B`` are the leaves, ``ka, kb`` the ranks and ``ida, idb`` the ids.
    Every node on both root paths is already realized because both leaves
    are.
    """
    M = root_diag_min(base, cnt[1])
    P = np.int64(1)
    Q = np.int64(1)
    for l in range(D):
        sh = D - l - 1
        pa = A >> sh
        qb = B >> sh
        if P == Q:
            if pa == qb:
                which = 0 if (pa & 1) == 0 else 2
            else:
                which = 1
            M = child_min_diag(base, P, M, which, cnt[2 * P], cnt[2 * P + 1])
        elif P < Q:
            M = child_min_off(base, P, Q, M, pa & 1, qb & 1,
                              cnt[2 * P], cnt[2 * P + 1], cnt[2 * Q], cnt[2 * Q + 1])
        else:
            M = child_min_off(base, Q, P, M, qb & 1, pa & 1,
                              cnt[2 * Q], cnt[2 * Q + 1], cnt[2 * P], cnt[2 * P + 1])
        P = pa
        Q = qb
    if A == B:
        return v_leaf_diag(base, A, M, cnt[A], ka, kb, ida, idb)
    if A < B:
        return v_leaf_off(base, A, B, M, cnt[A], cnt[B], ka, kb, ida, idb)
    return v_leaf_off(base, B, A, M, cnt[B], cnt[A], kb, ka, idb, ida)


@njit(cache=True)
def origin_pair_mark(cnt, base, D, B, kb, idb):
    M = root_origin_min(base, cnt[1])
    Y = np.int64(1)
    for l in range(D):
        ch = B >> (D - l - 1)
        M = child_min_origin(base, Y, M, ch & 1, cnt[2 * Y], cnt[2 * Y + 1])
        Y = ch
    return v_leaf_origin(base, B, M, cnt[B], kb, idb)


@njit(cache=True)
def member_pair_mark(T, base, a, b):
    """Edge mark between arena members (``-1`` is the origin)."""
    D = T.st[ST_DEPTH]
    if a < 0 or b < 0:
        j = b if a < 0 else a
        return origin_pair_mark(T.cnt, base, D, T.leaf[j], T.rank[j], T.ids[j])
    return pair_mark(T.cnt, base, D, T.leaf[a], T.leaf[b], T.rank[a], T.rank[b],
                     T.ids[a], T.ids[b])


# -- geometry and the connection rule --------------------------------------


@njit(cache=True)
def pow_d(s2, d):
    """``|x|**d`` from the squared norm."""
    if d == 2:
        return s2
    if d == 1:
        return math.sqrt(s2)
    return s2 ** (0.5 * d)


@njit(cache=True)
def kern(s, t, gamma, alpha):
    lo = s if s < t else t
    hi = t if s < t else s
    g = lo**gamma
    if alpha != 0.0:
        g *= hi**alpha
    return g


@njit(cache=True)
def reach(ui, uj, rpd, beta, gamma, alpha):
    """Argument of the profile: ``kernel * |x|**d / beta``."""
    return kern(ui, uj, gamma, alpha) * rpd / beta


@njit(cache=True)
def _member(T, a):
    d = T.st[ST_DIM]
    x = np.zeros(d)
    if a < 0:
        return x, T.fs[FS_ORIGIN_MARK]
    for c in range(d):
        x[c] = T.pos[a, c]
    return x, T.mark[a]


@njit(cache=True)
def edge_flag(T, base, pp, a, b, radius_form):
    """Edge indicator between members ``a != b``.

    ``radius_form`` evaluates ``|x-y|**d <= beta * W / g`` with the Pareto
    edge weight ``W = V**(-1/delta)``; for ``alpha = 0`` the factor ``1/g``
    is the larger of the two radii ``u**-gamma``.
    """
    d = T.st[ST_DIM]
    xa, ua = _member(T, a)
    xb, ub = _member(T, b)
    s2 = 0.0
    for c in range(d):
        dx = xa[c] - xb[c]
        s2 += dx * dx
    rpd = pow_d(s2, d)
    if radius_form:
        v = member_pair_mark(T, base, a, b)
        w = v ** (-1.0 / pp[3])
        lo = ua if ua < ub else ub
        hi = ub if ua < ub else ua
        rad = lo ** (-pp[1])
        if pp[2] != 0.0:
            rad *= hi ** (-pp[2])
        return rpd <= pp[0] * w * rad
    x = reach(ua, ub, rpd, pp[0], pp[1], pp[2])
    if x <= 1.0:
        return True
    return member_pair_mark(T, base, a, b) <= x ** (-pp[3])


# -- neighbour queries -----------------------------------------------------


@njit(cache=True)
def neighbors_fast(T, base, pp, a):
    """Neighbours of arena member ``a`` (``-1`` = origin) into ``T.nbuf``.

    Returns the number written.  The origin appears as ``-1``.
    """
    st = T.st
    cnt = T.cnt
    nmin = T.nmin
    nstamp = T.nstamp
    lstamp = T.lstamp
    lstart = T.lstart
    pos = T.pos
    mark = T.mark
    ids = T.ids
    blo = T.lo
    bhi = T.hi
    nbuf = T.nbuf
    sk = T.stk_i
    sf = T.stk_f
    stamp = st[ST_STAMP]
    lazy = st[ST_EXPLICIT] == 0
    D = st[ST_DEPTH]
    d = st[ST_DIM]
    beta = pp[0]
    gamma = pp[1]
    alpha = pp[2]
    delta = pp[3]
    is_origin = a < 0
    xi = np.zeros(d)
    if is_origin:
        ui = T.fs[FS_ORIGIN_MARK]
        A = np.int64(0)
        ka = np.int64(0)
        ida = np.int64(0)
    else:
        ui = mark[a]
        for c in range(d):
            xi[c] = pos[a, c]
        A = T.leaf[a]
        ka = T.rank[a]
        ida = ids[a]
    ui_g = ui**gamma
    n_out = 0
    top = 0
    N = cnt[1]
    edges = 0

    if is_origin:
        if N >= 1:
            sk[0, 0] = 1
            sk[0, 1] = 0
            sk[0, 2] = K_ORIG
            sf[0] = root_origin_min(base, N)
            top = 1
    else:
        if st[ST_HAS_ORIGIN] != 0:
            s2 = 0.0
            for c in range(d):
                s2 += xi[c] * xi[c]
            x = reach(ui, T.fs[FS_ORIGIN_MARK], pow_d(s2, d), beta, gamma, alpha)
            if x <= 1.0:
                nbuf[n_out] = -1
                n_out += 1
            else:
                edges += 1
                if origin_pair_mark(cnt, base, D, A, ka, ida) <= x ** (-delta):
                    nbuf[n_out] = -1
                    n_out += 1
        if N >= 2:
            sk[0, 0] = 1
            sk[0, 1] = 0
            sk[0, 2] = K_DIAG
            sf[0] = root_diag_min(base, N)
            top = 1

    while top > 0:
        top -= 1
        Y = sk[top, 0]
        lvl = sk[top, 1]
        kind = sk[top, 2]
        M = sf[top]
        if top + 4 >= sk.shape[0]:
            st[ST_OVERFLOW] = 2
            break
        if kind == K_DIAG:
            if lvl == D:
                s0 = lstart[Y]
                for k in range(cnt[Y]):
                    j = s0 + k
                    if j == a:
                        continue
                    s2 = 0.0
                    for c in range(d):
                        dx = pos[j, c] - xi[c]
                        s2 += dx * dx
                    x = reach(ui, mark[j], pow_d(s2, d), beta, gamma, alpha)
                    if x <= 1.0:
                        nbuf[n_out] = j
                        n_out += 1
                    else:
                        edges += 1
                        v = v_leaf_diag(base, Y, M, cnt[Y], ka, k, ida, ids[j])
                        if v <= x ** (-delta):
                            nbuf[n_out] = j
                            n_out += 1
                continue
            if lazy and nstamp[2 * Y] != stamp:
                split_node(cnt, nmin, nstamp, stamp, base, Y)
            ch = A >> (D - lvl - 1)
            sib = ch ^ 1
            c0 = cnt[2 * Y]
            c1 = cnt[2 * Y + 1]
            if cnt[sib] > 0:
                sk[top, 0] = sib
                sk[top, 1] = lvl + 1
                sk[top, 2] = K_OFF
                sf[top] = child_min_diag(base, Y, M, 1, c0, c1)
                top += 1
            if cnt[ch] > 1:
                sk[top, 0] = ch
                sk[top, 1] = lvl + 1
                sk[top, 2] = K_DIAG
                sf[top] = child_min_diag(base, Y, M, 0 if (ch & 1) == 0 else 2, c0, c1)
                top += 1
            continue

        if kind == K_FULL:
            if cnt[Y] == 0:
                continue
            if lvl == D:
                if lazy and lstamp[Y] != stamp:
                    fill_leaf(T, base, Y)
                s0 = lstart[Y]
                for k in range(cnt[Y]):
                    nbuf[n_out] = s0 + k
                    n_out += 1
                continue
            if lazy and nstamp[2 * Y] != stamp:
                split_node(cnt, nmin, nstamp, stamp, base, Y)
            for b in range(2):
                sk[top, 0] = 2 * Y + b
                sk[top, 1] = lvl + 1
                sk[top, 2] = K_FULL
                top += 1
            continue

        # off-diagonal or origin block: try to cover or discard it whole
        mn2 = 0.0
        mx2 = 0.0
        for c in range(d):
            lo = blo[Y, c]
            hi = bhi[Y, c]
            v = xi[c]
            if v < lo:
                g = lo - v
            elif v > hi:
                g = v - hi
            else:
                g = 0.0
            mn2 += g * g
            f = max(abs(v - lo), abs(v - hi))
            mx2 += f * f
        if pow_d(mx2, d) * ui_g * (1.0 + SLACK) <= beta:
            sk[top, 0] = Y
            sk[top, 1] = lvl
            sk[top, 2] = K_FULL
            top += 1
            continue
        xlo = kern(ui, nmin[Y], gamma, alpha) * pow_d(mn2, d) / beta * (1.0 - SLACK)
        pmax = 1.0 if xlo <= 1.0 else xlo ** (-delta)
        if M > pmax:
            continue
        if lvl == D:
            if lazy and lstamp[Y] != stamp:
                fill_leaf(T, base, Y)
            s0 = lstart[Y]
            nY = cnt[Y]
            for k in range(nY):
                j = s0 + k
                s2 = 0.0
                for c in range(d):
                    dx = pos[j, c] - xi[c]
                    s2 += dx * dx
                x = reach(ui, mark[j], pow_d(s2, d), beta, gamma, alpha)
                if x <= 1.0:
                    nbuf[n_out] = j
                    n_out += 1
                    continue
                edges += 1
                if kind == K_ORIG:
                    v = v_leaf_origin(base, Y, M, nY, k, ids[j])
                elif A < Y:
                    v = v_leaf_off(base, A, Y, M, cnt[A], nY, ka, k, ida, ids[j])
                else:
                    v = v_leaf_off(base, Y, A, M, nY, cnt[A], k, ka, ids[j], ida)
                if v <= x ** (-delta):
                    nbuf[n_out] = j
                    n_out += 1
            continue
        if lazy and nstamp[2 * Y] != stamp:
            split_node(cnt, nmin, nstamp, stamp, base, Y)
        if kind == K_ORIG:
            for b in range(2):
                if cnt[2 * Y + b] == 0:
                    continue
                sk[top, 0] = 2 * Y + b
                sk[top, 1] = lvl + 1
                sk[top, 2] = K_ORIG
                sf[top] = child_min_origin(base, Y, M, b, cnt[2 * Y], cnt[2 * Y + 1])
                top += 1
            continue
        X = A >> (D - lvl)
        if lazy and nstamp[2 * X] != stamp:
            split_node(cnt, nmin, nstamp, stamp, base, X)
        abit = (A >> (D - lvl - 1)) & 1
        x0 = cnt[2 * X]
        x1 = cnt[2 * X + 1]
        y0 = cnt[2 * Y]
        y1 = cnt[2 * Y + 1]
        for b in range(2):
            if cnt[2 * Y + b] == 0:
                continue
            if X < Y:
                Mc = child_min_off(base, X, Y, M, abit, b, x0, x1, y0, y1)
            else:
                Mc = child_min_off(base, Y, X, M, b, abit, y0, y1, x0, x1)
            sk[top, 0] = 2 * Y + b
            sk[top, 1] = lvl + 1
            sk[top, 2] = K_OFF
            sf[top] = Mc
            top += 1
    st[ST_EDGES] += edges
    return n_out


@njit(cache=True)
def neighbors_naive(T, base, pp, a):
    """Same contract as :func:`neighbors_fast` by checking every vertex.

    Requires every leaf to be materialized.
    """
    st = T.st
    cnt = T.cnt
    pos = T.pos
    mark = T.mark
    ids = T.ids
    leaf = T.leaf
    rank = T.rank
    nbuf = T.nbuf
    d = st[ST_DIM]
    D = st[ST_DEPTH]
    beta = pp[0]
    gamma = pp[1]
    alpha = pp[2]
    delta = pp[3]
    n_pts = st[ST_FILL]
    n_out = 0
    edges = 0
    if a < 0:
        ui = T.fs[FS_ORIGIN_MARK]
        for j in range(n_pts):
            s2 = 0.0
            for c in range(d):
                s2 += pos[j, c] * pos[j, c]
            x = reach(ui, mark[j], pow_d(s2, d), beta, gamma, alpha)
            if x <= 1.0:
                nbuf[n_out] = j
                n_out += 1
                continue
            edges += 1
            if origin_pair_mark(cnt, base, D, leaf[j], rank[j], ids[j]) <= x ** (-delta):
                nbuf[n_out] = j
                n_out += 1
        st[ST_EDGES] += edges
        return n_out
    ui = mark[a]
    if st[ST_HAS_ORIGIN] != 0:
        s2 = 0.0
        for c in range(d):
            s2 += pos[a, c] * pos[a, c]
        x = reach(ui, T.fs[FS_ORIGIN_MARK], pow_d(s2, d), beta, gamma, alpha)
        if x <= 1.0:
            nbuf[n_out] = -1
            n_out += 1
        else:
            edges += 1
            if origin_pair_mark(cnt, base, D, leaf[a], rank[a], ids[a]) <= x ** (-delta):
                nbuf[n_out] = -1
                n_out += 1
    for j in range(n_pts):
        if j == a:
            continue
        s2 = 0.0
        for c in range(d):
            dx = pos[j, c] - pos[a, c]
            s2 += dx * dx
        x = reach(ui, mark[j], pow_d(s2, d), beta, gamma, alpha)
        if x <= 1.0:
            nbuf[n_out] = j
            n_out += 1
            continue
        edges += 1
        v = pair_mark(cnt, base, D, leaf[a], leaf[j], rank[a], rank[j], ids[a], ids[j])
        if v <= x ** (-delta):
            nbuf[n_out] = j
            n_out += 1
    st[ST_EDGES] += edges
    return n_out


# -- cluster exploration ---------------------------------------------------


@njit(cache=True)
def explore(T, base, pp, margin, budget, reverse, naive):
    """Breadth-first search of the origin's cluster.

    Returns ``(size, diameter_pow_d, censored, edges_examined, frontier_max)``.
    """
    st = T.st
    d = st[ST_DIM]
    st[ST_VSTAMP] += 1
    vs = st[ST_VSTAMP]
    thr = 0.5 * T.fs[FS_L] - margin
    q = T.queue
    q[0] = -1
    head = 0
    tail = 1
    level_end = 1
    size = 0
    diam = 0.0
    cens = False
    frontier = 0
    e0 = st[ST_EDGES]
    while head < tail:
        v = q[head]
        head += 1
        if naive:
            n = neighbors_naive(T, base, pp, v)
        else:
            n = neighbors_fast(T, base, pp, v)
        for t in range(n):
            j = T.nbuf[n - 1 - t] if reverse else T.nbuf[t]
            if j < 0 or T.vis[j] == vs:
                continue
            T.vis[j] = vs
            size += 1
            s2 = 0.0
            far = False
            for c in range(d):
                x = T.pos[j, c]
                s2 += x * x
                if abs(x) > thr:
                    far = True
            rpd = pow_d(s2, d)
            if rpd > diam:
                diam = rpd
            if far:
                cens = True
            if size > budget:
                return budget, diam, True, st[ST_EDGES] - e0, max(frontier, tail - level_end)
            q[tail] = j
            tail += 1
        if head == level_end:
            if tail - level_end > frontier:
                frontier = tail - level_end
            level_end = tail
    return size, diam, cens, st[ST_EDGES] - e0, frontier


# -- batched trials --------------------------------------------------------

TASK_CLUSTER = 0
TASK_DEGREE = 1
TASK_EVENT = 2


@njit(cache=True)
def run_cluster_batch(T, seed, t0, n, pp, origin_mark, margin, budget,
                      size, diam, cens, edges, frontier):
    for t in range(n):
        base = trial_key(np.uint64(seed), np.uint64(t0 + t))
        begin_trial(T, base, origin_mark, 1)
        if T.st[ST_OVERFLOW] != 0:
            return t
        r = explore(T, base, pp, margin, budget, False, False)
        size[t] = r[0]
        diam[t] = r[1]
        cens[t] = r[2]
        edges[t] = r[3]
        frontier[t] = r[4]
        if T.st[ST_OVERFLOW] != 0:
            return t
    return n


@njit(cache=True)
def run_degree_batch(T, seed, t0, n, pp, origin_mark, u_above, deg, deg_above):
    for t in range(n):
        base = trial_key(np.uint64(seed), np.uint64(t0 + t))
        begin_trial(T, base, origin_mark, 1)
        if T.st[ST_OVERFLOW] != 0:
            return t
        k = neighbors_fast(T, base, pp, -1)
        c = 0
        for i in range(k):
            if T.mark[T.nbuf[i]] > u_above:
                c += 1
        deg[t] = k
        deg_above[t] = c
        if T.st[ST_OVERFLOW] != 0:
            return t
    return n


@njit(cache=True)
def run_event_batch(T, seed, t0, n, pp, origin_mark, ms, zeta, hits):
    """Flag trials where the origin has a neighbour ``y`` with
    ``|y|**d < m`` and ``u_y <= m**-zeta``, for every ``m`` in ``ms``."""
    d = T.st[ST_DIM]
    nm = ms.shape[0]
    thr = np.empty(nm)
    for q in range(nm):
        thr[q] = ms[q] ** (-zeta)
    for t in range(n):
        base = trial_key(np.uint64(seed), np.uint64(t0 + t))
        begin_trial(T, base, origin_mark, 1)
        if T.st[ST_OVERFLOW] != 0:
            return t
        k = neighbors_fast(T, base, pp, -1)
        for q in range(nm):
            hits[t, q] = False
        for i in range(k):
            j = T.nbuf[i]
            s2 = 0.0
            for c in range(d):
                s2 += T.pos[j, c] * T.pos[j, c]
            rpd = pow_d(s2, d)
            u = T.mark[j]
            for q in range(nm):
                if rpd < ms[q] and u <= thr[q]:
                    hits[t, q] = True
    return n


# -- explicit clouds -------------------------------------------------------


@njit(cache=True)
def assign_leaves(lo, hi, pos, D):
    """Leaf node containing each position (right child on ties)."""
    n = pos.shape[0]
    d = pos.shape[1]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 1
        for l in range(D):
            ax = l % d
            mid = hi[2 * node, ax]
            node = 2 * node + (1 if pos[i, ax] >= mid else 0)
        out[i] = node
    return out


@njit(cache=True)
def load_explicit(T, pos, mark, ids, leaf, rank):
    """Fill the tree from sorted point data; every node becomes realized."""
    st = T.st
    D = st[ST_DEPTH]
    n = pos.shape[0]
    st[ST_EXPLICIT] = 1
    st[ST_FILL] = n
    st[ST_N] = n
    T.cnt[:] = 0
    T.nmin[:] = 1.0
    prev = -1
    for i in range(n):
        T.pos[i] = pos[i]
        T.mark[i] = mark[i]
        T.ids[i] = ids[i]
        T.leaf[i] = leaf[i]
        T.rank[i] = rank[i]
        L = leaf[i]
        if L != prev:
            T.lstart[L] = i
            prev = L
        T.cnt[L] += 1
        if mark[i] < T.nmin[L]:
            T.nmin[L] = mark[i]
    for node in range((1 << D) - 1, 0, -1):
        T.cnt[node] = T.cnt[2 * node] + T.cnt[2 * node + 1]
        T.nmin[node] = min(T.nmin[2 * node], T.nmin[2 * node + 1])


# -- exhaustive checks -------------------------------------------------------


@njit(cache=True)
def formulation_mismatches(T, base, pp):
    """Pairs where the rule form at ``(a, b)`` and the radius form at
    ``(b, a)`` disagree.  The swapped order also exercises symmetry of ``V``."""
    n = T.st[ST_FILL]
    start = -1 if T.st[ST_HAS_ORIGIN] != 0 else 0
    bad = 0
    for a in range(start, n):
        for b in range(a + 1, n):
            if edge_flag(T, base, pp, a, b, False) != edge_flag(T, base, pp, b, a, True):
                bad += 1
    return bad


@njit(cache=True)
def inclusion_violations(T, base, pp_small, pp_large):
    """Pairs that are edges under ``pp_small`` but not under ``pp_large``."""
    n = T.st[ST_FILL]
    start = -1 if T.st[ST_HAS_ORIGIN] != 0 else 0
    bad = 0
    for a in range(start, n):
        for b in range(a + 1, n):
            if edge_flag(T, base, pp_small, a, b, False) and not edge_flag(T, base, pp_large, a, b, False):
                bad += 1
    return bad


@njit(cache=True)
def fast_naive_mismatches(T, base, pp, rows):
    """Rows whose fast and naive neighbour sets differ."""
    bad = 0
    for i in range(rows.shape[0]):
        a = rows[i]
        k = neighbors_fast(T, base, pp, a)
        f = np.sort(T.nbuf[:k].copy())
        k2 = neighbors_naive(T, base, pp, a)
        g = np.sort(T.nbuf[:k2].copy())
        if k != k2:
            bad += 1
        elif k > 0 and np.any(f != g):
            bad += 1
    return bad
