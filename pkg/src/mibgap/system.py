"""Mixed-integer bilinear (MIB) systems.

A system has integer variables ``x`` (length m), real variables ``y``
(length n) and three blocks of constraints::

    x^T A_i y + b_i^T y <= c_i      bilinear rows, the only rows with slack
    C x <= d                         integer-linear block
    D y <= e                         real-linear block

All constants are Python ints.  In *standard* form the integer block is
exactly ``-x <= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .geometry import (
    Feasible,
    Infeasible,
    Polyhedron,
    Unbounded,
    as_rational,
    lp_solve,
    solve_lp,
    sqrt_upper,
)


class UnboundedSystem(ValueError):
    """The real block ``{y : Dy <= e}`` is not a polytope."""


def _int_matrix(M, rows: Optional[int] = None, cols: Optional[int] = None, what="matrix"):
    out = []
    for row in M:
        r = []
        for a in row:
            if isinstance(a, bool) or not isinstance(a, int):
                q = as_rational(a)
                if q.denominator != 1:
                    raise ValueError("%s entries must be integers, got %s" % (what, q))
                a = q.numerator
            r.append(int(a))
        if cols is not None and len(r) != cols:
            raise ValueError("%s row has length %d, expected %d" % (what, len(r), cols))
        out.append(tuple(r))
    if rows is not None and len(out) != rows:
        raise ValueError("%s has %d rows, expected %d" % (what, len(out), rows))
    return tuple(out)


def _int_vector(v, n: Optional[int] = None, what="vector"):
    return tuple(x for (x,) in _int_matrix([[a] for a in v], n, 1, what))


@dataclass(frozen=True)
class BilinearRow:
    A: tuple  # m x n
    b: tuple  # n
    c: int

    def value(self, x, y) -> Fraction:
        s = Fraction(0)
        for xi, Ai in zip(x, self.A):
            if xi:
                s += xi * sum(a * yj for a, yj in zip(Ai, y) if a)
        return s + sum(bj * yj for bj, yj in zip(self.b, y) if bj)

    def y_coefficients(self, x) -> tuple:
        """Coefficient vector g with ``row(x, y) = g^T y``."""
        n = len(self.b)
        g = list(self.b)
        for xi, Ai in zip(x, self.A):
            if xi:
                for j in range(n):
                    g[j] += xi * Ai[j]
        return tuple(g)

    @property
    def is_linear(self) -> bool:
        return not any(a for row in self.A for a in row)


@dataclass(frozen=True)
class MibSystem:
    m: int
    n: int
    rows: tuple
    C: tuple
    d: tuple
    D: tuple
    e: tuple
    form: str = "general"

    @classmethod
    def build(cls, m, n, rows, C=(), d=(), D=(), e=(), form="general") -> "MibSystem":
        """Validating constructor.  ``rows`` holds (A, b, c) triples; ``b``
        may be None for the zero vector."""
        brs = []
        for A, b, c in rows:
            A = _int_matrix(A, m, n, "bilinear A")
            b = _int_vector(b if b is not None else [0] * n, n, "bilinear b")
            (c,) = _int_vector([c], 1, "bilinear c")
            brs.append(BilinearRow(A, b, c))
        C = _int_matrix(C, None, m, "C")
        d = _int_vector(d, len(C), "d")
        D = _int_matrix(D, None, n, "D")
        e = _int_vector(e, len(D), "e")
        if form not in ("general", "standard"):
            raise ValueError("form must be 'general' or 'standard'")
        s = cls(m, n, tuple(brs), C, d, D, e, form)
        if form == "standard" and not s.integer_block_is_nonneg():
            raise ValueError("standard form requires the integer block to be exactly -x <= 0")
        return s

    @classmethod
    def standard(cls, m, n, rows, D=(), e=()) -> "MibSystem":
        C = [[-1 if i == j else 0 for j in range(m)] for i in range(m)]
        return cls.build(m, n, rows, C, [0] * m, D, e, "standard")

    def integer_block_is_nonneg(self) -> bool:
        if len(self.C) != self.m:
            return False
        for i, row in enumerate(self.C):
            if any(a != (-1 if j == i else 0) for j, a in enumerate(row)):
                return False
        return not any(self.d)

    @property
    def H(self) -> int:
        vals = [abs(a) for r in self.rows for row in r.A for a in row]
        vals += [abs(a) for r in self.rows for a in r.b]
        vals += [abs(r.c) for r in self.rows]
        vals += [abs(a) for row in self.C for a in row] + [abs(a) for a in self.d]
        vals += [abs(a) for row in self.D for a in row] + [abs(a) for a in self.e]
        return max(vals + [1])

    @property
    def ell(self) -> int:
        return len(self.rows)

    def y_polyhedron(self) -> Polyhedron:
        return Polyhedron.from_rows(self.D, self.e, self.n)

    def key(self) -> tuple:
        """Structural key with duplicate rows removed and rows sorted."""
        rows = tuple(sorted(set((r.A, r.b, r.c) for r in self.rows)))
        lin = tuple(sorted(set(zip(self.D, self.e))))
        ilin = tuple(sorted(set(zip(self.C, self.d))))
        return (self.m, self.n, rows, ilin, lin, self.form)


@dataclass(frozen=True)
class Assignment:
    x: tuple
    y: tuple


@dataclass(frozen=True)
class SatWithSlack:
    margin: Fraction


@dataclass(frozen=True)
class SatNoSlack:
    margin: Fraction


@dataclass(frozen=True)
class Violated:
    block: str  # "bilinear", "integer" or "real"
    row: int  # 0-based
    amount: Fraction

    def __str__(self):
        return "%s row %d violated by %s" % (self.block, self.row + 1, self.amount)


def margins(s: MibSystem, a: Assignment) -> list:
    return [r.c - r.value(a.x, a.y) for r in s.rows]


def check_assignment(s: MibSystem, a: Assignment, eps) -> object:
    """Classify ``a`` as SatWithSlack, SatNoSlack or Violated."""
    eps = as_rational(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if len(a.x) != s.m or len(a.y) != s.n:
        raise ValueError("assignment dimensions do not match the system")
    if any(not isinstance(v, int) for v in a.x):
        raise ValueError("integer part must consist of ints")
    y = tuple(as_rational(v) for v in a.y)
    for i, (row, di) in enumerate(zip(s.C, s.d)):
        lhs = sum(c * v for c, v in zip(row, a.x))
        if lhs > di:
            return Violated("integer", i, Fraction(lhs - di))
    for i, (row, ei) in enumerate(zip(s.D, s.e)):
        lhs = sum(c * v for c, v in zip(row, y))
        if lhs > ei:
            return Violated("real", i, lhs - ei)
    worst = None
    for i, r in enumerate(s.rows):
        mg = r.c - r.value(a.x, y)
        if mg < 0:
            return Violated("bilinear", i, -mg)
        worst = mg if worst is None else min(worst, mg)
    if worst is None:
        # no bilinear rows: slack requirement is vacuous
        return SatWithSlack(Fraction(0))
    if worst >= eps:
        return SatWithSlack(worst)
    return SatNoSlack(worst)


# ---------------------------------------------------------------------------
# boundedness


@dataclass(frozen=True)
class Bounded:
    kappa1_upper: Fraction


@dataclass(frozen=True)
class UnboundedRay:
    ray: tuple


def kappa1_upper(dim: int, H: int) -> int:
    """Integer upper bound on ``dim^{1/2} H^{dim^2 + dim}``."""
    root = sqrt_upper(dim, 2)
    return math.ceil(root * H ** (dim * dim + dim))


def bound_dimension(s: MibSystem) -> int:
    return max(s.m, s.n, 1)


def is_bounded(s: MibSystem):
    poly = s.y_polyhedron()
    if s.n == 0:
        return Bounded(Fraction(kappa1_upper(bound_dimension(s), s.H)))
    if poly.is_empty:
        # an empty polytope is bounded
        return Bounded(Fraction(kappa1_upper(bound_dimension(s), s.H)))
    for j in range(s.n):
        for sign in (1, -1):
            obj = [0] * s.n
            obj[j] = sign
            res = lp_solve(poly, obj, "max")
            if isinstance(res, Unbounded):
                return UnboundedRay(res.ray)
    return Bounded(Fraction(kappa1_upper(bound_dimension(s), s.H)))


def y_box(s: MibSystem):
    """Per-coordinate bounds of ``{y : Dy <= e}`` (None when empty)."""
    poly = s.y_polyhedron()
    if s.n == 0:
        return ()
    if poly.is_empty:
        return None
    return poly.bounds


# ---------------------------------------------------------------------------
# standard form


@dataclass(frozen=True)
class StandardPiece:
    system: MibSystem
    base: tuple
    periods: tuple  # columns of length s.m; x = base + sum z_j periods[j]

    def lift(self, z) -> tuple:
        x = list(self.base)
        for zj, p in zip(z, self.periods):
            for i, pi in enumerate(p):
                x[i] += zj * pi
        return tuple(x)


def substitute(s: MibSystem, w, P) -> MibSystem:
    """Change of variables ``x = w + P z`` on a standard-form system.

    ``P`` is given as a list of columns.  The result is standard form over
    ``len(P)`` integer variables and the same real variables.
    """
    if s.form != "standard":
        raise ValueError("substitute expects a standard-form system")
    if len(w) != s.m or any(len(col) != s.m for col in P):
        raise ValueError("substitution dimensions do not match the system")
    return _subst_rows(s, w, P)


def to_standard_form(s: MibSystem) -> list:
    """List of :class:`StandardPiece` whose union of solutions, lifted
    through ``x = base + P z``, is exactly the solution set of ``s``."""
    from .semilinear import Unpointed, decompose

    if s.form == "standard" or s.integer_block_is_nonneg():
        eye = tuple(tuple(1 if i == j else 0 for i in range(s.m)) for j in range(s.m))
        std = s if s.form == "standard" else MibSystem.standard(
            s.m, s.n, [(r.A, r.b, r.c) for r in s.rows], s.D, s.e)
        return [StandardPiece(std, tuple([0] * s.m), eye)]
    if s.m == 0:
        # no integer variables: the integer block is a list of constant checks
        if all(di >= 0 for di in s.d):
            return [StandardPiece(MibSystem.standard(0, s.n, [(r.A, r.b, r.c) for r in s.rows], s.D, s.e), (), ())]
        return []
    hls = decompose([list(r) for r in s.C], list(s.d))
    eye_sys = MibSystem.build(s.m, s.n, [(r.A, r.b, r.c) for r in s.rows],
                              [[-1 if i == j else 0 for j in range(s.m)] for i in range(s.m)],
                              [0] * s.m, s.D, s.e, "standard")
    out = []
    for piece in hls.pieces:
        # pieces may leave the nonnegative orthant when C does not force it;
        # the substituted system only keeps z >= 0, which is all we need
        out.append(StandardPiece(_subst_rows(eye_sys, piece.base, piece.periods), piece.base, piece.periods))
    return out


def _subst_rows(s: MibSystem, w, P) -> MibSystem:
    rows = []
    for r in s.rows:
        A2 = [[sum(col[i] * r.A[i][j] for i in range(s.m)) for j in range(s.n)] for col in P]
        b2 = [r.b[j] + sum(w[i] * r.A[i][j] for i in range(s.m)) for j in range(s.n)]
        rows.append((A2, b2, r.c))
    return MibSystem.standard(len(P), s.n, rows, s.D, s.e)
