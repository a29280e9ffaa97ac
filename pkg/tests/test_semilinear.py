import itertools

import pytest
from hypothesis import given, strategies as st

from mibgap.semilinear import HybridLinearSet, LinearSet, decompose, window_check
from mibgap.system import MibSystem, substitute

NONNEG2 = [[-1, 0], [0, -1]]


def eq(row, rhs):
    return [row, [-a for a in row]], [rhs, -rhs]


def _pieces(hls):
    return sorted((p.base, p.periods) for p in hls.pieces)


def test_diagonal():
    C, d = eq([1, -1], 0)
    hls = decompose(C + NONNEG2, d + [0, 0])
    assert _pieces(hls) == [((0, 0), ((1, 1),))]
    assert window_check(hls, C + NONNEG2, d + [0, 0], 10)


def test_finite_hyperplane():
    C, d = eq([1, 1], 2)
    hls = decompose(C + NONNEG2, d + [0, 0])
    assert sorted(p.base for p in hls.pieces) == [(0, 2), (1, 1), (2, 0)]
    assert all(p.periods == () for p in hls.pieces)


def test_affine_line():
    # 2 x1 - 3 x2 = 1: x = (2 + 3t, 1 + 2t), t >= 0
    C, d = eq([2, -3], 1)
    hls = decompose(C + NONNEG2, d + [0, 0])
    assert _pieces(hls) == [((2, 1), ((3, 2),))]
    assert window_check(hls, C + NONNEG2, d + [0, 0], 10)


def test_window_check_catches_mutation():
    C, d = eq([2, -3], 1)
    bad = HybridLinearSet(2, (LinearSet((3, 1), ((3, 2),)),))
    assert not window_check(bad, C + NONNEG2, d + [0, 0], 10)


def test_empty_set():
    C, d = [[1, 0], [-1, 0], [0, -1]], [-1, 0, 0]
    hls = decompose(C, d)
    assert hls.pieces == ()
    assert window_check(HybridLinearSet(2, ()), C, d, 10)


def test_contains():
    L = LinearSet((2, 1), ((3, 2),))
    assert L.contains((8, 5))
    assert not L.contains((5, 2))
    assert not L.contains((-1, -1))


def test_substitute_identity():
    s = MibSystem.standard(2, 1, [([[1], [2]], [1], 3)], [[1], [-1]], [1, 0])
    assert substitute(s, (0, 0), [(1, 0), (0, 1)]) == s


def test_substitute_shift():
    # x = 2 + z in x*y <= 3 gives z*y + 2y <= 3
    s = MibSystem.standard(1, 1, [([[1]], None, 3)], [[1], [-1]], [1, 0])
    t = substitute(s, (2,), [(1,)])
    assert t.rows[0].A == ((1,),) and t.rows[0].b == (2,) and t.rows[0].c == 3


coef = st.integers(-3, 3)


@st.composite
def systems(draw):
    m = draw(st.integers(1, 3))
    k = draw(st.integers(1, 3))
    C, d = [], []
    for _ in range(k):
        row = [draw(coef) for _ in range(m)]
        rhs = draw(coef)
        if draw(st.booleans()):
            C += [row, [-a for a in row]]
            d += [rhs, -rhs]
        else:
            C.append(row)
            d.append(rhs)
    for i in range(m):
        C.append([-1 if j == i else 0 for j in range(m)])
        d.append(0)
    return C, d


@given(systems())
def test_decompose_window(sys_):
    C, d = sys_
    hls = decompose(C, d)
    assert window_check(hls, C, d, 6)


@given(st.lists(st.integers(-3, 3), min_size=2, max_size=3).filter(any), st.integers(-3, 3))
def test_hyperplane_pieces_drop_a_dimension(u, b):
    m = len(u)
    C = [u, [-a for a in u]] + [[-1 if j == i else 0 for j in range(m)] for i in range(m)]
    hls = decompose(C, [b, -b] + [0] * m)
    assert all(len(p.periods) <= m - 1 for p in hls.pieces)


@given(st.integers(0, 3), st.integers(1, 3), st.integers(0, 4), st.integers(0, 4))
def test_substitution_transfers_witnesses(w, p, z, y4):
    from fractions import Fraction as F

    s = MibSystem.standard(1, 1, [([[2]], [-1], 5)], [[1], [-1]], [1, 0])
    t = substitute(s, (w,), [(p,)])
    y = F(y4, 4)
    assert t.rows[0].value((z,), (y,)) == s.rows[0].value((w + p * z,), (y,))
