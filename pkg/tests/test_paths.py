import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from softbool.paths import (MarkPath, is_local_maximum, is_shortcut_free, shortcut_free_bruteforce,
                            skeleton, skeleton_bruteforce)

FIG = [0.5, 0.3, 0.7, 0.6, 0.1, 0.45, 0.25]
mark_lists = st.lists(st.floats(0.001, 0.999), min_size=2, max_size=40)


def test_local_maximum_examples():
    assert is_local_maximum([0.5, 0.7, 0.3], 1)
    inc = [0.1, 0.2, 0.3, 0.4]
    assert not any(is_local_maximum(inc, i) for i in (1, 2))
    assert [i for i in range(1, len(FIG) - 1) if is_local_maximum(FIG, i)] == [2, 5]


@pytest.mark.parametrize("i", [0, 2])
def test_local_maximum_endpoint_error(i):
    with pytest.raises(IndexError):
        is_local_maximum([0.5, 0.7, 0.3], i)


def test_skeleton_example():
    s = skeleton(FIG)
    assert s.skeleton_indices == (0, 1, 4, 6)
    assert s.skeleton_marks(MarkPath(FIG)) == [0.5, 0.3, 0.1, 0.25]
    assert [FIG[i] for i in s.removal_order] == [0.7, 0.6, 0.45]
    assert s.connector_segments == ((), (2, 3), (5,))


@pytest.mark.parametrize("marks", [[0.9, 0.5, 0.2, 0.1], [0.3, 0.6], [0.2, 0.2, 0.2]])
def test_skeleton_trivial(marks):
    assert skeleton(marks).skeleton_indices == tuple(range(len(marks)))


def test_ties_lower_index_is_smaller():
    # equal marks: index 2 counts as larger than index 1
    assert is_local_maximum([0.1, 0.5, 0.5, 0.2], 2)
    assert not is_local_maximum([0.1, 0.5, 0.5, 0.2], 1)


@given(mark_lists)
def test_skeleton_properties(marks):
    p = MarkPath(marks)
    s = skeleton(p)
    sk = s.skeleton_indices
    assert sk[0] == 0 and sk[-1] == len(marks) - 1
    keys = [p.key(i) for i in sk]
    j = keys.index(min(keys))
    assert all(a > b for a, b in zip(keys[:j], keys[1:j + 1]))
    assert all(a < b for a, b in zip(keys[j:], keys[j + 1:]))
    sub = [marks[i] for i in sk]
    assert skeleton(sub).skeleton_indices == tuple(range(len(sub)))
    assert sorted(sk + tuple(s.removal_order)) == list(range(len(marks)))


@given(st.lists(st.integers(0, 6), min_size=2, max_size=10))
def test_skeleton_matches_bruteforce_with_ties(vals):
    marks = [(v + 1) / 8 for v in vals]
    assert skeleton(marks) == skeleton_bruteforce(marks)


def test_skeleton_bruteforce_bulk():
    rng = np.random.default_rng(1)
    for _ in range(2000):
        m = rng.random(rng.integers(2, 11))
        assert skeleton(m) == skeleton_bruteforce(m)


def test_markpath_validation():
    with pytest.raises(ValueError):
        MarkPath([0.5])
    with pytest.raises(ValueError):
        MarkPath([0.5, 0.6], ids=[1])


def test_shortcut_examples():
    edges = {frozenset(e) for e in [("a", "b"), ("b", "c"), ("a", "c")]}
    adj = lambda x, y: frozenset((x, y)) in edges
    assert not is_shortcut_free(["a", "b", "c"], adj)
    assert is_shortcut_free(["a", "b"], adj)
    assert is_shortcut_free(["a"], adj)


@given(st.integers(2, 9), st.floats(0.05, 0.6), st.integers(0, 2**31))
def test_shortcut_matches_bruteforce(n, p, seed):
    rng = np.random.default_rng(seed)
    a = rng.random((n, n)) < p
    a = a | a.T
    for k in range(n - 1):
        a[k, k + 1] = a[k + 1, k] = True
    adj = lambda x, y: bool(a[x, y])
    path = list(range(n))
    assert is_shortcut_free(path, adj) == shortcut_free_bruteforce(path, adj)


def test_shortcut_exhaustive_small():
    n = 5
    pairs = [(i, j) for i in range(n) for j in range(i + 2, n)]
    for chords in itertools.product([False, True], repeat=len(pairs)):
        extra = {p for p, c in zip(pairs, chords) if c}
        adj = lambda x, y: abs(x - y) == 1 or (min(x, y), max(x, y)) in extra
        assert is_shortcut_free(range(n), adj) == shortcut_free_bruteforce(range(n), adj)
