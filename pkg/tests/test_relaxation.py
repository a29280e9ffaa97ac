import itertools
import json
from fractions import Fraction as F
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from mibgap import formats
from mibgap.generators import doubleexp
from mibgap.relaxation import build_relaxed, compute_constants, count_directions, directions, flatness_bound
from mibgap.realfeas import ExactPass, WeakPass, check_witness
from mibgap.system import MibSystem

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = Path(__file__).parent / "golden"


def reference():
    return formats.system_from_json(formats.load(ROOT / "instances" / "ledger_reference.json"))


def test_ledger_reference_values():
    L = compute_constants(reference(), F(1, 2))
    assert L.kappa1_upper == 4
    assert L.norms == (2,)
    assert L.r == F(1, 32)
    assert L.omega_upper == 1 and L.omega_hat == 2
    assert L.U == tuple((k,) for k in range(1, 24))
    assert L.U_size == 23
    assert L.kappa2 == 42
    assert L.kappa3 == 4
    assert L.delta_s == F(1, 8)


def test_ledger_golden_file():
    L = compute_constants(reference(), F(1, 2))
    assert formats.dumps(L.to_json()) == (GOLDEN / "ledger_m1_H2.json").read_text()


def brute_directions(m, K):
    out = []
    r = 6
    for v in itertools.product(range(-r, r + 1), repeat=m):
        if any(v) and sum(a * a for a in v) < K:
            first = next(a for a in v if a)
            if first > 0:
                out.append(v)
    return out


def test_direction_count_m2():
    # 2 r |u| < Omega(2) + 1/2 with r = 1/4  <=>  |u|^2 < 121/4
    K = (F(11, 4) / F(1, 2)) ** 2
    assert count_directions(2, K) == len(brute_directions(2, K)) == 48
    assert sorted(directions(2, K)) == sorted(brute_directions(2, K))


def test_direction_threshold_empty():
    # r = 1, omega_hat = 2: 2|u| < 3/2 has no nonzero integer solution
    assert list(directions(1, F(3, 4) ** 2)) == []


@given(st.integers(1, 3), st.integers(1, 20))
def test_directions_sorted_and_normalised(m, K):
    ds = list(directions(m, F(K)))
    norms = [sum(a * a for a in u) for u in ds]
    assert norms == sorted(norms)
    assert all(next(a for a in u if a) > 0 for u in ds)
    assert len(set(ds)) == len(ds) == count_directions(m, F(K))


def test_flatness_values():
    assert flatness_bound(1) == 1
    assert flatness_bound(2) == F(9, 4)
    assert flatness_bound(3) == 54
    assert flatness_bound(2, {2: "3"}) == 3


XY = MibSystem.standard(1, 1, [([[1]], None, 1)], [[1], [-1]], [1, 0])


def test_relaxed_without_directions():
    rp = build_relaxed(XY, F(1, 2), dirs=(), omega_hat=2).problem
    assert rp.names == ("y0", "x0")
    assert rp.lo == (0, 1) and rp.hi == (1, None)
    assert len(rp.rows) == 3  # core + two D rows
    assert rp.rows[0].rhs == 1 - F(3, 8) and rp.rows[0].weakenable


def test_relaxed_single_direction():
    rp = build_relaxed(XY, F(1, 2), dirs=[(1,)], omega_hat=2).problem
    assert rp.names == ("y0", "x0", "p0_0", "q0_0")
    width = rp.rows[-1]
    # p - q >= 2 stored as -p + q <= -2
    assert width.lin == ((2, -1), (3, 1)) and width.rhs == -2 and width.weakenable
    hard = [r for r in rp.rows if r.label.startswith(("p0", "q0"))]
    assert len(hard) == 2 and not any(r.weakenable for r in hard)
    assert check_witness(rp, [F(1, 4), 1, 4, 0]) == ExactPass()
    assert isinstance(check_witness(rp, [F(1, 4), 1, F(15, 8), 0]), WeakPass)


def test_relaxed_doubleexp_slack():
    s = doubleexp(2)
    eps = F(1, 8)
    rp = build_relaxed(s, eps, dirs=(), omega_hat=flatness_bound(s.m) + 1).problem
    core = [r for r in rp.rows if r.label.startswith("core")]
    assert len(core) == len(s.rows)
    for r, row in zip(core, s.rows):
        assert r.rhs == row.c - F(3, 32)
    # margins at the known witness are 1/8, 3/8, 3/16, all above 3/32
    assert check_witness(rp, [F(1), F(7, 16), F(1, 8), 2, 5]) == ExactPass()
