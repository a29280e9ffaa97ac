"""Constant ledger and the strengthened relaxed real system.

Margins used throughout (eps is the requested slack):

* relaxed core rows carry slack ``3 eps / 4`` and may be weakened by
  ``delta_s = min(eps/4, 1/2)``, so a weak witness keeps margin ``eps/2``;
* the width threshold is ``omega_hat = Omega(m) + 1``; after weakening a
  direction still has width ``>= Omega(m) + 1/2``;
* the ball radius ``r`` is built from ``eps/2`` so that directions outside
  ``U`` are wide automatically.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from .geometry import as_rational, format_rational, operator_norm_upper, sqrt_upper
from .realfeas import PolyRow, RealProblem
from .system import Bounded, MibSystem, UnboundedSystem, bound_dimension, is_bounded, kappa1_upper, y_box

U_ENUMERATION_CAP = 100000

_OMEGA_TABLE = {1: Fraction(1), 2: Fraction(9, 4)}


def flatness_bound(m: int, table: Optional[dict] = None) -> Fraction:
    """Rational upper bound on the flatness constant in dimension m."""
    if m < 1:
        raise ValueError("flatness bound needs m >= 1")
    if table and m in table:
        return as_rational(table[m])
    if m in _OMEGA_TABLE:
        return _OMEGA_TABLE[m]
    return Fraction(2 * m ** 3)


def delta_s(eps: Fraction) -> Fraction:
    return min(eps / 4, Fraction(1, 2))


def directions(m: int, norm_sq_below: Optional[Fraction] = None, max_norm_sq: Optional[int] = None) -> Iterator[tuple]:
    """Sign-normalised nonzero integer vectors (first nonzero entry > 0) in
    order of increasing squared norm, then lexicographically.

    Stops before ``norm_sq_below`` (strict) or after ``max_norm_sq``.
    """
    if m < 1:
        return
    k = 1
    while True:
        if norm_sq_below is not None and k >= norm_sq_below:
            return
        if max_norm_sq is not None and k > max_norm_sq:
            return
        r = math.isqrt(k)
        shell = []
        for u in itertools.product(range(-r, r + 1), repeat=m):
            if sum(a * a for a in u) != k:
                continue
            first = next(a for a in u if a)
            if first > 0:
                shell.append(u)
        shell.sort(key=lambda u: tuple(-a for a in u))
        yield from shell
        k += 1


def count_directions(m: int, norm_sq_below: Fraction) -> int:
    """Number of sign-normalised u with ``|u|^2 < norm_sq_below``."""
    # |u|^2 is an integer, so the condition is |u|^2 <= K
    K = math.ceil(norm_sq_below) - 1
    if K < 1:
        return 0
    # count all nonzero lattice points in the closed ball, then halve
    total = _ball_count(m, K) - 1
    return total // 2


def _ball_count(m: int, K: int) -> int:
    if m == 0:
        return 1
    if K < 0:
        return 0
    r = math.isqrt(K)
    if m == 1:
        return 2 * r + 1
    return sum(_ball_count(m - 1, K - a * a) for a in range(-r, r + 1))


@dataclass(frozen=True)
class ConstantLedger:
    m: int
    n: int
    eps: Fraction
    H: int
    kappa1_upper: Fraction
    norms: tuple
    r: Fraction
    omega_upper: Fraction
    omega_hat: Fraction
    U_norm_sq_below: Fraction  # u is in U iff |u|^2 < this
    U_size: Optional[int]
    U: Optional[tuple]  # explicit when small enough
    kappa2: Fraction
    kappa3: Fraction
    delta_s: Fraction

    def in_U(self, u) -> bool:
        return any(u) and sum(a * a for a in u) < self.U_norm_sq_below

    def to_json(self) -> dict:
        f = format_rational
        out = {
            "m": self.m,
            "n": self.n,
            "eps": f(self.eps),
            "H": str(self.H),
            "kappa1_upper": f(self.kappa1_upper),
            "operator_norm_upper": [f(v) for v in self.norms],
            "r": f(self.r),
            "omega_upper": f(self.omega_upper),
            "omega_hat": f(self.omega_hat),
            "U_norm_sq_below": f(self.U_norm_sq_below),
            "U_size": None if self.U_size is None else str(self.U_size),
            "kappa2": f(self.kappa2),
            "kappa3": f(self.kappa3),
            "delta_s": f(self.delta_s),
            "magnitude_bound": "2^(kappa3^O(m^3 (m+n))) with kappa3 = %s" % f(self.kappa3),
        }
        if self.U is not None and len(self.U) <= 64:
            out["U"] = [[str(a) for a in u] for u in self.U]
        return out


def compute_constants(s: MibSystem, eps, omega_table: Optional[dict] = None) -> ConstantLedger:
    eps = as_rational(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if s.m < 1:
        raise ValueError("the ledger needs at least one integer variable")
    bd = is_bounded(s)
    if not isinstance(bd, Bounded):
        raise UnboundedSystem("real block is unbounded along %s" % (bd.ray,))
    H = s.H
    k1 = bd.kappa1_upper
    norms = tuple(operator_norm_upper(r.A) for r in s.rows)
    r = Fraction(1)
    for N in norms:
        if N > 0:
            r = min(r, (eps / 2) / (N * k1))
    omega = flatness_bound(s.m, omega_table)
    omega_hat = omega + 1
    # 2 r |u| < omega + 1/2  <=>  |u|^2 < ((omega + 1/2) / (2 r))^2
    bound = ((omega + Fraction(1, 2)) / (2 * r)) ** 2
    size = None
    U = None
    if s.m <= 3 or bound < 10 ** 6:
        try:
            if bound < 10 ** 12:
                size = count_directions(s.m, bound)
        except RecursionError:
            size = None
    if size is not None and size <= U_ENUMERATION_CAP:
        U = tuple(directions(s.m, bound))
    root_d = sqrt_upper(bound_dimension(s), 2)
    kappa2 = omega_hat * (1 + H / eps * (1 + root_d * k1))
    kappa3 = Fraction(s.m * H ** (s.m * s.m)) / eps
    return ConstantLedger(s.m, s.n, eps, H, k1, norms, r, omega, omega_hat, bound, size, U,
                          kappa2, kappa3, delta_s(eps))


# ---------------------------------------------------------------------------
# relaxed problem


@dataclass(frozen=True)
class RelaxedProblem:
    problem: RealProblem
    m: int
    n: int
    directions: tuple
    eps: Fraction
    omega_hat: Fraction

    def y_of(self, point) -> tuple:
        return tuple(point[: self.n])

    def x_of(self, point) -> tuple:
        return tuple(point[self.n: self.n + self.m])


def _bilinear_poly(row, xoff: int, n: int, rhs, weakenable, label):
    quad = []
    for a, Ai in enumerate(row.A):
        for j, c in enumerate(Ai):
            if c:
                quad.append(((j, xoff + a), c))
    lin = [(j, c) for j, c in enumerate(row.b) if c]
    return PolyRow.make(lin, quad, rhs, weakenable, label)


def build_relaxed(s: MibSystem, eps, ledger: Optional[ConstantLedger] = None,
                  dirs: Optional[Sequence[tuple]] = None, omega_hat=None) -> RelaxedProblem:
    """Relaxed real system over (y, x, p_1, q_1, ...).

    ``dirs`` defaults to the ledger's explicit U.  Variables: y keeps the
    bounds of ``Dy <= e``; x >= 1; witness points p_j, q_j >= 0.
    """
    eps = as_rational(eps)
    if omega_hat is None:
        if ledger is None:
            raise ValueError("omega_hat or a ledger is required")
        omega_hat = ledger.omega_hat
    omega_hat = as_rational(omega_hat)
    if dirs is None:
        if ledger is None or ledger.U is None:
            raise ValueError("explicit directions are required when U is not enumerated")
        dirs = ledger.U
    dirs = tuple(tuple(u) for u in dirs)
    m, n = s.m, s.n
    box = y_box(s)
    if box is None:
        raise ValueError("real block is empty")
    names = ["y%d" % j for j in range(n)] + ["x%d" % a for a in range(m)]
    lo = [b[0] for b in box] + [Fraction(1)] * m
    hi = [b[1] for b in box] + [None] * m
    if any(v is None for v in lo[:n] + hi[:n]):
        raise UnboundedSystem("real block is unbounded")
    rows = []
    core = Fraction(3, 4) * eps
    for i, r in enumerate(s.rows):
        rows.append(_bilinear_poly(r, n, n, r.c - core, True, "core%d" % i))
    for i, (Drow, ei) in enumerate(zip(s.D, s.e)):
        rows.append(PolyRow.make([(j, c) for j, c in enumerate(Drow) if c], (), ei, False, "D%d" % i))
    for k, u in enumerate(dirs):
        if len(u) != m:
            raise ValueError("direction has wrong length")
        poff = len(names)
        names += ["p%d_%d" % (k, a) for a in range(m)]
        qoff = len(names)
        names += ["q%d_%d" % (k, a) for a in range(m)]
        lo += [Fraction(0)] * (2 * m)
        hi += [None] * (2 * m)
        for i, r in enumerate(s.rows):
            rows.append(_bilinear_poly(r, poff, n, r.c, False, "p%d_row%d" % (k, i)))
            rows.append(_bilinear_poly(r, qoff, n, r.c, False, "q%d_row%d" % (k, i)))
        lin = [(poff + a, c) for a, c in enumerate(u) if c] + [(qoff + a, -c) for a, c in enumerate(u) if c]
        rows.append(PolyRow.make(lin, (), omega_hat, True, "width%d" % k, sense=">="))
    prob = RealProblem(tuple(names), tuple(lo), tuple(hi), tuple(rows), delta_s(eps), tuple(range(n)))
    return RelaxedProblem(prob, m, n, dirs, eps, omega_hat)
