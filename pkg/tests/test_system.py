from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from mibgap.generators import doubleexp
from mibgap.system import (
    Assignment,
    Bounded,
    MibSystem,
    SatNoSlack,
    SatWithSlack,
    UnboundedRay,
    Violated,
    check_assignment,
    is_bounded,
    kappa1_upper,
    substitute,
    to_standard_form,
)

# x*y <= 1, 0 <= y <= 1, x >= 0
XY = MibSystem.standard(1, 1, [([[1]], None, 1)], [[1], [-1]], [1, 0])


def test_check_assignment_examples():
    assert check_assignment(XY, Assignment((1,), (F(1),)), F(1, 2)) == SatNoSlack(F(0))
    assert check_assignment(XY, Assignment((1,), (F(1, 4),)), F(1, 2)) == SatWithSlack(F(3, 4))
    v = check_assignment(XY, Assignment((2,), (F(1),)), F(1, 2))
    assert isinstance(v, Violated) and v.block == "bilinear" and v.row == 0 and v.amount == 1


def test_check_assignment_blocks():
    assert check_assignment(XY, Assignment((-1,), (F(0),)), 1).block == "integer"
    assert check_assignment(XY, Assignment((0,), (F(2),)), 1).block == "real"
    with pytest.raises(ValueError):
        check_assignment(XY, Assignment((0,), (F(0),)), 0)
    with pytest.raises(ValueError):
        check_assignment(XY, Assignment((0, 0), (F(0),)), 1)


def test_boundedness():
    assert is_bounded(XY) == Bounded(F(1))
    ray = MibSystem.standard(1, 1, [([[1]], None, 1)], [[-1]], [0])
    r = is_bounded(ray)
    assert isinstance(r, UnboundedRay) and tuple(r.ray) == (1,)


def test_kappa1():
    assert kappa1_upper(1, 1) == 1
    assert kappa1_upper(2, 3) == 1094
    assert kappa1_upper(1, 2) == 4


def test_H():
    s = MibSystem.standard(2, 1, [([[3], [-1]], [2], -1)], [[1], [-1]], [1, 0])
    assert s.H == 3


def test_standard_form_unchanged():
    pieces = to_standard_form(XY)
    assert len(pieces) == 1 and pieces[0].system == XY


def test_standard_form_shift():
    s = MibSystem.build(1, 1, [([[1]], [0], 3)], [[-1]], [-2], [[1], [-1]], [1, 0])
    pieces = to_standard_form(s)
    assert len(pieces) == 1
    p = pieces[0]
    assert p.base == (2,) and p.periods == ((1,),)
    assert p.system.rows[0].b == (2,) and p.system.rows[0].A == ((1,),)


def test_standard_form_finite():
    s = MibSystem.build(2, 1, [([[1], [1]], [0], 3)], [[1, 1], [-1, -1], [-1, 0], [0, -1]],
                        [2, -2, 0, 0], [[1], [-1]], [1, 0])
    pieces = to_standard_form(s)
    assert sorted(p.base for p in pieces) == [(0, 2), (1, 1), (2, 0)]
    assert all(p.system.m == 0 for p in pieces)


def test_doubleexp_elimination():
    # eliminating x1 = 2 folds A_i[0] * 2 into b_i
    s = doubleexp(2)
    pieces = [p for p in to_standard_form(s)]
    assert pieces
    points = [(F(1), F(7, 16), F(1, 8)), (F(1, 3), F(0), F(1)), (F(1, 2), F(1, 2), F(1, 2)),
              (F(0), F(1, 5), F(2, 7)), (F(3, 4), F(1, 9), F(0))]
    for p in pieces:
        for z in [(0,) * p.system.m, (1,) * p.system.m, (3,) * p.system.m]:
            x = p.lift(z)
            for y in points:
                for r0, r1 in zip(s.rows, p.system.rows):
                    assert r0.value(x, y) == r1.value(z, y)


coef = st.integers(-3, 3)


@given(st.lists(coef, min_size=2, max_size=2), coef, st.integers(0, 3), st.integers(0, 3),
       st.integers(0, 4))
def test_substitution_preserves_values(Arow, b, w, z, y4):
    s = MibSystem.standard(1, 2, [([Arow], [b, 0], 1)], [[1, 0], [-1, 0], [0, 1], [0, -1]], [1, 0, 1, 0])
    t = substitute(s, (w,), [(2,)])
    y = (F(y4, 4), F(1, 3))
    assert t.rows[0].value((z,), y) == s.rows[0].value((w + 2 * z,), y)


@given(st.integers(0, 5), st.integers(0, 5), st.integers(0, 8))
def test_monotone_in_nonneg_rows(x1, x2, y8):
    # margins of a row with nonnegative A shrink as x grows
    s = MibSystem.standard(2, 1, [([[1], [2]], None, 10)], [[1], [-1]], [1, 0])
    y = (F(y8, 8),)
    assert s.rows[0].value((x1, x2), y) <= s.rows[0].value((x1 + 1, x2), y)
