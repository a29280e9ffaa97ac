"""Hybrid linear sets and integer decompositions of ``{x in Z^m : Cx <= d}``.

A linear set ``L(w, P)`` is ``{w + P z : z in Z^k, z >= 0}``; a hybrid
linear set is a finite union of them.  :func:`decompose` produces such a
union for the integer points of a pointed polyhedron:

1. implicit equalities are found by LP and their integer solution lattice
   is parametrised as ``x = x0 + N t`` (column Hermite reduction);
2. the polyhedron in ``t`` coordinates is split as ``conv(V) + cone(R)``;
3. for every maximal linearly independent subset ``S`` of the extreme
   rays, the integer points of the polyhedron inside
   ``box(conv(V) + parallelepiped(S))`` become bases with periods ``S``.

Carathéodory's theorem makes the simplicial cones over all such ``S``
cover ``cone(R)``, so the union is exact.  Pieces overlap, which is fine
for membership and substitution.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .geometry import (
    Feasible,
    Polyhedron,
    double_description,
    lp_solve,
    rank,
    solve_linear,
)

from .system import substitute  # noqa: F401  (re-exported)

log = logging.getLogger(__name__)


class Unpointed(ValueError):
    """The integer solution set contains a full line."""


@dataclass(frozen=True)
class LinearSet:
    base: tuple
    periods: tuple  # tuple of columns, each a tuple of length m

    def __post_init__(self):
        for p in self.periods:
            if len(p) != len(self.base):
                raise ValueError("period length differs from base length")
            if not any(p):
                raise ValueError("zero period")

    @property
    def dim(self) -> int:
        return len(self.base)

    def point(self, z) -> tuple:
        out = list(self.base)
        for zj, p in zip(z, self.periods):
            for i, pi in enumerate(p):
                out[i] += zj * pi
        return tuple(out)

    def contains(self, x) -> bool:
        """Exact membership: x - w in the nonnegative integer span of P."""
        diff = [a - b for a, b in zip(x, self.base)]
        k = len(self.periods)
        if k == 0:
            return not any(diff)
        # P has independent columns by construction; solve least-square free
        # via the k x k normal system of an independent row subset.
        rows = list(range(self.dim))
        cols = [list(p) for p in self.periods]
        for idx in itertools.combinations(rows, k):
            M = [[cols[j][i] for j in range(k)] for i in idx]
            if rank(M) < k:
                continue
            z = solve_linear(M, [diff[i] for i in idx])
            if z is None:
                continue
            if any(zj.denominator != 1 or zj < 0 for zj in z):
                return False
            return self.point([int(zj) for zj in z]) == tuple(x)
        return False


@dataclass(frozen=True)
class HybridLinearSet:
    dim: int
    pieces: tuple = ()

    def contains(self, x) -> bool:
        return any(p.contains(x) for p in self.pieces)

    def points_in_box(self, bound: int) -> set:
        """All denoted points with coordinates in [0, bound]."""
        out = set()
        for p in self.pieces:
            out |= _piece_points(p, bound)
        return out


def _piece_points(piece: LinearSet, bound: int) -> set:
    k = len(piece.periods)
    m = piece.dim
    if k == 0:
        return {piece.base} if all(0 <= a <= bound for a in piece.base) else set()
    # 0 <= w + P z <= bound, z >= 0, as rows in z
    A, b = [], []
    for i in range(m):
        row = [p[i] for p in piece.periods]
        A.append(row)
        b.append(bound - piece.base[i])
        A.append([-a for a in row])
        b.append(piece.base[i])
    for j in range(k):
        A.append([-1 if jj == j else 0 for jj in range(k)])
        b.append(0)
    poly = Polyhedron.from_rows(A, b, k)
    if poly.is_empty:
        return set()
    caps = []
    for lo, hi in poly.bounds:
        if hi is None:
            raise ValueError("piece is unbounded inside the window")
        caps.append(math.floor(hi))
    out = set()
    for z in itertools.product(*(range(c + 1) for c in caps)):
        x = piece.point(z)
        if all(0 <= a <= bound for a in x):
            out.add(x)
    return out


# ---------------------------------------------------------------------------
# integer lattice of an equality system


def _ext_gcd(a: int, b: int):
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def integer_lattice(E, f, m: int):
    """Parametrise ``{x in Z^m : E x = f}`` as ``x0 + N t``.

    Returns (x0, N) with N a list of m-column vectors, or None when there
    is no integer solution.  E must have full row rank.
    """
    r = len(E)
    M = [list(row) for row in E]
    U = [[1 if i == j else 0 for j in range(m)] for i in range(m)]

    def colop(i, j, a, b, c, d):
        # (col_i, col_j) <- (a col_i + b col_j, c col_i + d col_j)
        for row in M:
            ci, cj = row[i], row[j]
            row[i], row[j] = a * ci + b * cj, c * ci + d * cj
        for row in U:
            ci, cj = row[i], row[j]
            row[i], row[j] = a * ci + b * cj, c * ci + d * cj

    for i in range(r):
        piv = next((j for j in range(i, m) if M[i][j] != 0), None)
        if piv is None:
            raise ValueError("equality rows are dependent")
        if piv != i:
            colop(i, piv, 0, 1, 1, 0)
        for j in range(i + 1, m):
            if M[i][j] == 0:
                continue
            a, b = M[i][i], M[i][j]
            g, s, t = _ext_gcd(a, b)
            colop(i, j, s, t, -b // g, a // g)
        if M[i][i] < 0:
            for row in M:
                row[i] = -row[i]
            for row in U:
                row[i] = -row[i]
    y = []
    for i in range(r):
        acc = f[i] - sum(M[i][j] * y[j] for j in range(i))
        if acc % M[i][i] != 0:
            return None
        y.append(acc // M[i][i])
    x0 = [sum(U[p][j] * y[j] for j in range(r)) for p in range(m)]
    N = [tuple(U[p][j] for p in range(m)) for j in range(r, m)]
    N = _lll(N)
    return tuple(x0), N


def _lll(basis, delta=Fraction(3, 4)):
    """Exact LLL reduction of a short list of integer vectors."""
    B = [list(b) for b in basis]
    n = len(B)
    if n <= 1:
        return [tuple(b) for b in B]

    def gso(B):
        Bs, mu = [], [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            v = [Fraction(a) for a in B[i]]
            for j in range(i):
                den = sum(a * a for a in Bs[j])
                mu[i][j] = sum(Fraction(a) * b for a, b in zip(B[i], Bs[j])) / den
                v = [a - mu[i][j] * b for a, b in zip(v, Bs[j])]
            Bs.append(v)
        return Bs, mu

    k = 1
    Bs, mu = gso(B)
    guard = 0
    while k < n and guard < 10000:
        guard += 1
        for j in range(k - 1, -1, -1):
            q = round(mu[k][j])
            if q:
                B[k] = [a - q * b for a, b in zip(B[k], B[j])]
                Bs, mu = gso(B)
        nk = sum(a * a for a in Bs[k])
        nk1 = sum(a * a for a in Bs[k - 1])
        if nk >= (delta - mu[k][k - 1] ** 2) * nk1:
            k += 1
        else:
            B[k], B[k - 1] = B[k - 1], B[k]
            Bs, mu = gso(B)
            k = max(k - 1, 1)
    return [tuple(b) for b in B]


# ---------------------------------------------------------------------------
# decomposition


def _implicit_equalities(poly: Polyhedron):
    eq = []
    for i, row in enumerate(poly.A):
        if not any(row):
            continue
        res = lp_solve(poly, list(row), "min")
        if isinstance(res, Feasible) and res.value == poly.b[i]:
            eq.append(i)
    return eq


def _independent_rows(rows):
    chosen = []
    for r in rows:
        if rank(chosen + [r]) > len(chosen):
            chosen.append(r)
    return chosen


def _integer_points(A, b, lo, hi):
    """Integer points of {t : A t <= b} inside the box [lo, hi]."""
    k = len(lo)
    rows = list(zip(A, b))
    out = []
    if k == 0:
        if all(bi >= 0 for _, bi in rows):
            out.append(())
        return out

    def rec(j, prefix):
        if j == k:
            t = prefix
            if all(sum(a * v for a, v in zip(row, t)) <= bi for row, bi in rows):
                out.append(tuple(t))
            return
        for v in range(lo[j], hi[j] + 1):
            prefix.append(v)
            # prune on rows involving only fixed coordinates
            ok = True
            for row, bi in rows:
                if all(a == 0 for a in row[j + 1:]):
                    s = sum(a * t for a, t in zip(row, prefix))
                    if s > bi:
                        ok = False
                        break
            if ok:
                rec(j + 1, prefix)
            prefix.pop()

    rec(0, [])
    return out


def decompose(C, d, max_points: Optional[int] = None) -> HybridLinearSet:
    """Exact hybrid linear decomposition of ``{x in Z^m : C x <= d}``."""
    if not C:
        raise Unpointed("no constraints: the solution set is all of Z^m")
    m = len(C[0])
    poly = Polyhedron.from_rows(C, d, m)
    if poly.is_empty:
        return HybridLinearSet(m, ())
    eq_idx = _implicit_equalities(poly)
    E = _independent_rows([list(poly.A[i]) for i in eq_idx])
    if E:
        # keep integrality: scale each equality row to integers
        Ei, fi = [], []
        for row in E:
            i = [list(poly.A[j]) for j in eq_idx].index(row)
            bi = poly.b[eq_idx[i]]
            den = 1
            for a in list(row) + [bi]:
                den = den * a.denominator // math.gcd(den, a.denominator)
            Ei.append([int(a * den) for a in row])
            fi.append(int(bi * den))
        lat = integer_lattice(Ei, fi, m)
        if lat is None:
            return HybridLinearSet(m, ())
        x0, N = lat
    else:
        x0 = tuple([0] * m)
        N = [tuple(1 if i == j else 0 for i in range(m)) for j in range(m)]
    k = len(N)
    # t-space polyhedron: C (x0 + N t) <= d
    At = [[sum(row[i] * N[j][i] for i in range(m)) for j in range(k)] for row in poly.A]
    bt = [bi - sum(a * x for a, x in zip(row, x0)) for row, bi in zip(poly.A, poly.b)]
    if k == 0:
        if all(v >= 0 for v in bt):
            return HybridLinearSet(m, (LinearSet(tuple(x0), ()),))
        return HybridLinearSet(m, ())
    tpoly = Polyhedron.from_rows(At, bt, k)
    if rank(tpoly.A) < k:
        raise Unpointed("solution set contains a line")
    verts, rays = double_description(tpoly)
    rays = sorted(rays)
    vlo = [min(v[j] for v in verts) for j in range(k)]
    vhi = [max(v[j] for v in verts) for j in range(k)]
    if rays:
        r = rank([list(x) for x in rays])
        subsets = [S for S in itertools.combinations(rays, r) if rank([list(x) for x in S]) == r]
    else:
        subsets = [()]
    pieces = []
    seen = set()
    for S in subsets:
        lo = [math.floor(vlo[j] + sum(min(0, s[j]) for s in S)) for j in range(k)]
        hi = [math.ceil(vhi[j] + sum(max(0, s[j]) for s in S)) for j in range(k)]
        if max_points is not None:
            size = 1
            for a, b in zip(lo, hi):
                size *= b - a + 1
            if size > max_points:
                raise OverflowError("decomposition box has %d points" % size)
        pts = _integer_points(At, bt, lo, hi)
        if S:
            # b is redundant when b - s is itself a base of this cone
            ptset = set(pts)
            pts = [t for t in pts
                   if not any(tuple(a - c for a, c in zip(t, s)) in ptset for s in S)]
        periods = tuple(tuple(sum(N[j][i] * s[j] for j in range(k)) for i in range(m)) for s in S)
        for t in pts:
            w = tuple(x0[i] + sum(N[j][i] * t[j] for j in range(k)) for i in range(m))
            key = (w, periods)
            if key in seen:
                continue
            seen.add(key)
            pieces.append(LinearSet(w, periods))
    _magnitude_diagnostic(C, d, pieces)
    return HybridLinearSet(m, tuple(pieces))


def _magnitude_diagnostic(C, d, pieces):
    m = len(C[0])
    H = max([abs(a) for row in C for a in row] + [abs(b) for b in d] + [1])
    bound = (2 + (m + 1) * H) ** m
    worst = max([abs(a) for p in pieces for a in p.base]
                + [abs(a) for p in pieces for col in p.periods for a in col] + [0])
    if worst > bound:
        log.debug("decomposition entry %s exceeds (2+(m+1)H)^m = %s", worst, bound)


def window_check(hls: HybridLinearSet, C, d, bound: int) -> bool:
    """Exhaustive comparison of denotations on the box [0, bound]^m."""
    if bound < 0:
        raise ValueError("bound must be nonnegative")
    m = hls.dim
    want = set()
    for x in itertools.product(range(bound + 1), repeat=m):
        if all(sum(a * v for a, v in zip(row, x)) <= di for row, di in zip(C, d)):
            want.add(x)
    got = {p for p in hls.points_in_box(bound)}
    # points of the denotation outside the constraint set but inside the box
    # are caught because 'got' is compared as a whole
    return got == want
