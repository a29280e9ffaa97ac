import copy
import time
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from mibgap import verify
from mibgap.realfeas import (
    ExactPass,
    Fail,
    KernelExhausted,
    PolyRow,
    RealProblem,
    Refuted,
    WeakPass,
    Witness,
    check_witness,
    decide,
    verify_refutation,
)


def amgm():
    rows = (PolyRow.make((), [((0, 1), 1)], 1, sense=">="),
            PolyRow.make([(0, 1), (1, 1)], (), 1))
    return RealProblem(("x", "y"), (F(0), F(0)), (F(10), F(10)), rows, F(1, 4))


def product_only():
    rows = (PolyRow.make((), [((0, 1), 1)], 1, weakenable=True, sense=">="),)
    return RealProblem(("x", "y"), (F(0), F(0)), (F(2), F(2)), rows, F(1, 4))


def as_verifier_problem(p: RealProblem):
    rows = [(dict(r.lin), dict(r.quad), r.rhs) for r in p.rows]
    return verify._Problem(list(zip(p.lo, p.hi)), rows)


def test_amgm_refuted_and_reverified():
    t0 = time.monotonic()
    res = decide(amgm())
    assert time.monotonic() - t0 < 10
    assert isinstance(res, Refuted)
    assert verify_refutation(amgm(), res)
    verify.check_refutation(as_verifier_problem(amgm()), res.tree)


def _first_leaf(tree):
    while "cert" not in tree:
        tree = tree["children"][0]
    return tree


def test_amgm_mutated_certificate_rejected():
    res = decide(amgm())
    tree = copy.deepcopy(res.tree)
    leaf = _first_leaf(tree)
    cert = leaf["cert"]
    if cert["kind"] == "farkas":
        desc, lam = cert["multipliers"][0]
        cert["multipliers"][0] = (desc, lam * 2 + 1)
    else:
        cert["row"] = 1 - cert["row"]
    with pytest.raises(verify.Reject):
        verify.check_refutation(as_verifier_problem(amgm()), tree)


def test_amgm_split_outside_box_rejected():
    res = decide(amgm())
    tree = copy.deepcopy(res.tree)
    assert "split" in tree
    tree["at"] = F(11)
    with pytest.raises(verify.Reject):
        verify.check_refutation(as_verifier_problem(amgm()), tree)


def test_product_witness():
    res = decide(product_only())
    assert isinstance(res, Witness)
    assert not isinstance(check_witness(product_only(), res.point), Fail)


def test_hard_equality_boundary():
    rows = (PolyRow.make([(0, 1)], (), 1, sense=">="), PolyRow.make([(0, 1)], (), 1))
    p = RealProblem(("y",), (F(0),), (F(2),), rows, F(1, 4), branch=())
    res = decide(p)
    assert isinstance(res, Witness) and res.point == (1,) and not res.weakened


def test_check_witness_examples():
    p = product_only()
    assert check_witness(p, [F(3, 2), 1]) == ExactPass()
    assert check_witness(p, [1, 1]) == ExactPass()
    assert isinstance(check_witness(p, [F(1, 2), 1]), Fail)
    w = check_witness(p, [F(7, 8), 1])
    assert w == WeakPass(0, F(1, 8))
    assert check_witness(p, [3, 1]).row == -1


def test_kernel_budget():
    with pytest.raises(KernelExhausted):
        decide(amgm(), max_boxes=1)


@st.composite
def problems(draw):
    k = draw(st.integers(2, 3))
    rows = []
    for _ in range(draw(st.integers(1, 3))):
        lin = [(v, draw(st.integers(-2, 2))) for v in range(k)]
        quad = [((0, 1), draw(st.integers(-2, 2)))]
        rows.append(PolyRow.make(lin, quad, draw(st.integers(-3, 3)), draw(st.booleans())))
    return RealProblem(tuple("v%d" % i for i in range(k)), (F(0),) * k, (F(2),) * k, tuple(rows), F(1, 4))


@settings(max_examples=40)
@given(problems())
def test_kernel_outputs_check(p):
    try:
        res = decide(p, max_boxes=2000)
    except KernelExhausted:
        return
    if isinstance(res, Witness):
        assert not isinstance(check_witness(p, res.point), Fail)
        if not res.weakened:
            assert check_witness(p, res.point) == ExactPass()
    else:
        assert verify_refutation(p, res)
        verify.check_refutation(as_verifier_problem(p), res.tree)
