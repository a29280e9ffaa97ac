"""Exhaustive bounded oracle: enumerate integer x, solve an exact LP in y.

Independent of the engine's search: the only shared code is the exact LP.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .geometry import Feasible, Infeasible, as_rational, solve_lp
from .system import MibSystem


@dataclass(frozen=True)
class SatSlack:
    x: tuple
    y: tuple
    margin: Fraction


@dataclass(frozen=True)
class SatNoSlack:
    x: tuple
    y: tuple
    margin: Fraction


@dataclass(frozen=True)
class UnsatWithinBound:
    xbound: int
    # True when C x <= d confines x to the enumerated box, so "no solution
    # in the box" means "no solution at all"
    complete: bool


def _best_margin(s: MibSystem, x, cap):
    n = s.n
    A, b = [], []
    for r in s.rows:
        g = list(r.b)
        for xi, Ai in zip(x, r.A):
            if xi:
                for j in range(n):
                    g[j] += xi * Ai[j]
        A.append(g + [1])
        b.append(r.c)
    for Drow, ei in zip(s.D, s.e):
        A.append(list(Drow) + [0])
        b.append(ei)
    A.append([0] * n + [1])
    b.append(cap)
    res = solve_lp(A, b, [0] * n + [1])
    if not isinstance(res, Feasible):
        return None
    return res.value, tuple(res.point[:n])


def _y_ranges(s: MibSystem):
    out = []
    for j in range(s.n):
        rng = []
        for sign in (-1, 1):
            obj = [0] * s.n
            obj[j] = sign
            res = solve_lp(list(map(list, s.D)), list(s.e), obj)
            if not isinstance(res, Feasible):
                return None
            rng.append(sign * res.value)
        out.append(tuple(rng))
    return out


def _confined(s: MibSystem, xbound: int) -> bool:
    """Does C x <= d imply |x_i| <= xbound for every i?"""
    if s.m == 0:
        return True
    C = [list(r) for r in s.C]
    if not C:
        return False
    for i in range(s.m):
        for sign in (1, -1):
            obj = [0] * s.m
            obj[i] = sign
            res = solve_lp(C, list(s.d), obj)
            if isinstance(res, Infeasible):
                return True
            if not isinstance(res, Feasible) or res.value >= xbound + 1:
                return False
    return True


def oracle(s: MibSystem, eps, xbound: int):
    """Classify ``s`` by enumerating integer x with ``|x_i| <= xbound``.

    Standard-form systems enumerate ``[0, xbound]^m``.  Early exit on the
    first assignment with slack ``eps``.
    """
    eps = as_rational(eps)
    if xbound < 0:
        raise ValueError("xbound must be nonnegative")
    yr = _y_ranges(s) if s.n else []
    if yr is None:
        return UnsatWithinBound(xbound, True)
    lo = 0 if s.integer_block_is_nonneg() else -xbound
    cap = max(Fraction(1), eps)
    best = None
    for x in itertools.product(range(lo, xbound + 1), repeat=s.m):
        if any(sum(c * v for c, v in zip(row, x)) > di for row, di in zip(s.C, s.d)):
            continue
        # interval prefilter over the y bounding box
        skip = False
        for r in s.rows:
            low = 0
            for j in range(s.n):
                g = r.b[j] + sum(xi * r.A[i][j] for i, xi in enumerate(x))
                low += g * (yr[j][0] if g > 0 else yr[j][1])
            if low > r.c:
                skip = True
                break
        if skip:
            continue
        res = _best_margin(s, x, cap)
        if res is None:
            continue
        mg, y = res
        if mg >= eps:
            return SatSlack(tuple(x), y, mg)
        if mg >= 0 and (best is None or mg > best[2]):
            best = (tuple(x), y, mg)
    if best is not None:
        return SatNoSlack(*best)
    return UnsatWithinBound(xbound, _confined(s, xbound))
