"""Exact rational linear algebra, linear programming and polyhedral queries.

Everything here is exact.  The simplex core works on ``gmpy2.mpq`` for
speed; every value that crosses the public API is a ``fractions.Fraction``.

Conventions
-----------
A :class:`Polyhedron` is ``{x : A x <= b}`` with free variables.  The
lower level :func:`solve_lp` additionally accepts per-variable sign
constraints ``x_j >= 0`` which are *not* rows; its Farkas certificates are
accordingly ``lam >= 0, lam^T A_j >= 0`` on sign-constrained columns and
``lam^T A_j == 0`` on free columns, with ``lam^T b < 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Optional, Sequence, Union

from gmpy2 import mpq

Number = Union[int, Fraction]


class DimensionMismatch(ValueError):
    pass


class EmptyPolyhedron(ValueError):
    pass


# ---------------------------------------------------------------------------
# rationals


def as_rational(v) -> Fraction:
    """Coerce ints, Fractions, mpq and ``"p/q"`` strings to Fraction."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return parse_rational(v)
    if isinstance(v, float):
        raise TypeError("floating point values are not accepted: %r" % (v,))
    try:
        return Fraction(int(v.numerator), int(v.denominator))
    except AttributeError:
        raise TypeError("cannot interpret %r as a rational" % (v,)) from None


def parse_rational(s: str) -> Fraction:
    s = s.strip()
    if not s:
        raise ValueError("empty rational literal")
    if "." in s or "e" in s.lower():
        raise ValueError("decimal/float literal not allowed: %r" % s)
    if "/" in s:
        p, q = s.split("/", 1)
        q = int(q)
        if q == 0:
            raise ValueError("zero denominator in %r" % s)
        return Fraction(int(p), q)
    return Fraction(int(s))


def format_rational(q) -> str:
    q = as_rational(q)
    if q.denominator == 1:
        return str(q.numerator)
    return "%d/%d" % (q.numerator, q.denominator)


def sqrt_upper(q: Number, denominator: int = 64) -> Fraction:
    """Smallest multiple of ``1/denominator`` that is >= sqrt(q), or the
    exact square root when ``q`` is the square of a rational."""
    q = as_rational(q)
    if q < 0:
        raise ValueError("negative radicand")
    p, r = q.numerator, q.denominator
    sp, sr = math.isqrt(p), math.isqrt(r)
    if sp * sp == p and sr * sr == r:
        return Fraction(sp, sr)
    # sqrt(p/r) = sqrt(p*r)/r ; ceil(K*sqrt(p*r)/r) over K
    k = denominator
    t = p * r * k * k
    s = math.isqrt(t)
    # ceil(s'/r) where s' >= sqrt(t)
    num = s + 1 if s * s != t else s
    return Fraction(-(-num // r), k)


def to_mpq(v):
    if isinstance(v, Fraction):
        return mpq(v.numerator, v.denominator)
    return mpq(v)


def from_mpq(v) -> Fraction:
    return Fraction(int(v.numerator), int(v.denominator))


# ---------------------------------------------------------------------------
# dense exact linear algebra (small matrices)


def rank(rows: Sequence[Sequence[Number]]) -> int:
    return len(_row_echelon([list(map(to_mpq, r)) for r in rows])[1])


def _row_echelon(M):
    """In-place reduced row echelon form. Returns (M, pivot_columns)."""
    pivots = []
    if not M:
        return M, pivots
    ncols = len(M[0])
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        p = M[r][c]
        M[r] = [v / p for v in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == len(M):
            break
    return M, pivots


def solve_linear(M: Sequence[Sequence[Number]], v: Sequence[Number]) -> Optional[list]:
    """Solve the square system ``M z = v``; None when singular."""
    n = len(M)
    aug = [[to_mpq(a) for a in row] + [to_mpq(vi)] for row, vi in zip(M, v)]
    aug, piv = _row_echelon(aug)
    if len(piv) < n or piv[-1] == n:
        return None
    return [from_mpq(aug[i][n]) for i in range(n)]


def nullspace(rows: Sequence[Sequence[Number]], ncols: int) -> list:
    """Basis (list of Fraction vectors) of ``{z : rows z = 0}``."""
    M = [[to_mpq(a) for a in r] for r in rows]
    M, piv = _row_echelon(M) if M else (M, [])
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for f in free:
        z = [mpq(0)] * ncols
        z[f] = mpq(1)
        for i, pc in enumerate(piv):
            z[pc] = -M[i][f]
        basis.append([from_mpq(t) for t in z])
    return basis


def dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def primitive(v: Sequence[Number]) -> tuple:
    """Scale a rational vector to the primitive integer vector on its ray."""
    v = [as_rational(a) for a in v]
    den = 1
    for a in v:
        den = den * a.denominator // math.gcd(den, a.denominator)
    ints = [int(a * den) for a in v]
    g = 0
    for a in ints:
        g = math.gcd(g, a)
    if g == 0:
        return tuple(ints)
    return tuple(a // g for a in ints)


# ---------------------------------------------------------------------------
# linear programming


@dataclass(frozen=True)
class Feasible:
    point: tuple
    value: Optional[Fraction] = None
    duals: Optional[tuple] = None


@dataclass(frozen=True)
class Infeasible:
    certificate: tuple


@dataclass(frozen=True)
class Unbounded:
    point: tuple
    ray: tuple


LpOutcome = Union[Feasible, Infeasible, Unbounded]

_BLAND_AFTER = 40


def solve_lp(A, b, c=None, maximize: bool = True, nonneg=None) -> LpOutcome:
    """Optimise ``c^T x`` over ``{A x <= b}``, ``x_j >= 0`` where ``nonneg[j]``.

    ``c=None`` asks for feasibility only.  Deterministic: Dantzig pricing
    with smallest-index tie-break, falling back to Bland's rule after a run
    of degenerate pivots.  Feasible results carry optimal duals
    ``y >= 0`` for the rows.
    """
    m = len(A)
    k = len(c) if c is not None else (len(A[0]) if A else 0)
    if nonneg is None:
        nonneg = [False] * k
    if len(nonneg) != k or any(len(row) != k for row in A) or len(b) != m:
        raise DimensionMismatch("LP dimensions inconsistent")
    if c is None:
        c = [0] * k

    # structural columns: one per sign-constrained var, two per free var
    colmap = []
    ncol = 0
    for j in range(k):
        if nonneg[j]:
            colmap.append((ncol, None))
            ncol += 1
        else:
            colmap.append((ncol, ncol + 1))
            ncol += 2
    nstruct = ncol
    slack0 = nstruct
    nart = sum(1 for bi in b if bi < 0)
    art0 = slack0 + m
    N = art0 + nart
    T = []
    basis = []
    a_idx = art0
    for i in range(m):
        row = [mpq(0)] * (N + 1)
        for j in range(k):
            a = A[i][j]
            if a:
                a = to_mpq(a)
                p, q = colmap[j]
                row[p] = a
                if q is not None:
                    row[q] = -a
        row[slack0 + i] = mpq(1)
        bi = to_mpq(b[i])
        row[N] = bi
        if bi < 0:
            row = [-v for v in row]
            row[a_idx] = mpq(1)
            basis.append(a_idx)
            a_idx += 1
        else:
            basis.append(slack0 + i)
        T.append(row)

    def phase2_row():
        r = [mpq(0)] * (N + 1)
        for j in range(k):
            cj = c[j]
            if cj:
                cj = to_mpq(cj) if maximize else -to_mpq(cj)
                p, q = colmap[j]
                r[p] = -cj
                if q is not None:
                    r[q] = cj
        for i, bc in enumerate(basis):
            f = r[bc]
            if f:
                ri = T[i]
                for jj in range(N + 1):
                    if ri[jj]:
                        r[jj] -= f * ri[jj]
        return r

    allowed = [True] * N
    if nart:
        w = [mpq(0)] * (N + 1)
        for j in range(art0, N):
            w[j] = mpq(1)
        for i, bc in enumerate(basis):
            if bc >= art0:
                w = [x - y for x, y in zip(w, T[i])]
        status, _ = _iterate(T, basis, [w], allowed, N)
        assert status == "optimal"
        if w[N] < 0:
            lam = tuple(from_mpq(w[slack0 + i]) for i in range(m))
            return Infeasible(lam)
        # drive artificials out of the basis
        i = 0
        while i < len(T):
            if basis[i] >= art0:
                row = T[i]
                s = next((j for j in range(art0) if row[j] != 0), None)
                if s is None:
                    del T[i]
                    del basis[i]
                    continue
                _pivot(T, [w], i, s, basis)
            i += 1
        for j in range(art0, N):
            allowed[j] = False
    z = phase2_row()
    status, col = _iterate(T, basis, [z], allowed, N)
    x = _extract(T, basis, colmap, k, N)
    if status == "unbounded":
        ray_v = {col: mpq(1)}
        for i, bc in enumerate(basis):
            if T[i][col] != 0:
                ray_v[bc] = -T[i][col]
        ray = []
        for j in range(k):
            p, q = colmap[j]
            val = ray_v.get(p, 0) - (ray_v.get(q, 0) if q is not None else 0)
            ray.append(from_mpq(mpq(val)))
        return Unbounded(tuple(x), tuple(ray))
    duals = tuple(from_mpq(z[slack0 + i]) for i in range(m))
    val = from_mpq(z[N]) if maximize else -from_mpq(z[N])
    return Feasible(tuple(x), val, duals)


def _extract(T, basis, colmap, k, N):
    v = {}
    for i, bc in enumerate(basis):
        v[bc] = T[i][N]
    out = []
    for j in range(k):
        p, q = colmap[j]
        val = v.get(p, 0) - (v.get(q, 0) if q is not None else 0)
        out.append(from_mpq(mpq(val)))
    return out


def _pivot(T, objs, r, s, basis):
    prow = T[r]
    p = prow[s]
    if p != 1:
        prow = [v / p for v in prow]
        T[r] = prow
    nz = [j for j, v in enumerate(prow) if v]
    for i, row in enumerate(T):
        if i != r:
            f = row[s]
            if f:
                for j in nz:
                    row[j] -= f * prow[j]
    for row in objs:
        f = row[s]
        if f:
            for j in nz:
                row[j] -= f * prow[j]
    basis[r] = s


def _iterate(T, basis, objs, allowed, N):
    z = objs[0]
    degenerate = 0
    bland = False
    while True:
        s = None
        if bland:
            for j in range(N):
                if allowed[j] and z[j] < 0:
                    s = j
                    break
        else:
            best = 0
            for j in range(N):
                if allowed[j] and z[j] < best:
                    best = z[j]
                    s = j
        if s is None:
            return "optimal", None
        r = None
        rn = rd = None
        for i, row in enumerate(T):
            a = row[s]
            if a > 0:
                num = row[N]
                if r is None:
                    r, rn, rd = i, num, a
                    continue
                lhs = num * rd
                rhs = rn * a
                if lhs < rhs or (lhs == rhs and basis[i] < basis[r]):
                    r, rn, rd = i, num, a
        if r is None:
            return "unbounded", s
        if rn == 0:
            degenerate += 1
            if degenerate > _BLAND_AFTER:
                bland = True
        else:
            degenerate = 0
        _pivot(T, objs, r, s, basis)


def check_farkas(A, b, lam, nonneg=None) -> bool:
    """Exact re-verification of an infeasibility certificate."""
    k = len(A[0]) if A else 0
    if nonneg is None:
        nonneg = [False] * k
    if len(lam) != len(A):
        return False
    if any(l < 0 for l in lam):
        return False
    for j in range(k):
        s = sum(l * row[j] for l, row in zip(lam, A) if l)
        if nonneg[j]:
            if s < 0:
                return False
        elif s != 0:
            return False
    return sum(l * bi for l, bi in zip(lam, b) if l) < 0


# ---------------------------------------------------------------------------
# polyhedra


@dataclass(frozen=True)
class Polyhedron:
    """``{x in Q^dim : A x <= b}``."""

    A: tuple
    b: tuple
    dim: int

    @classmethod
    def from_rows(cls, A, b, dim: Optional[int] = None) -> "Polyhedron":
        A = tuple(tuple(as_rational(a) for a in row) for row in A)
        b = tuple(as_rational(v) for v in b)
        if dim is None:
            if not A:
                raise DimensionMismatch("dimension required for a polyhedron without rows")
            dim = len(A[0])
        if len(A) != len(b) or any(len(row) != dim for row in A):
            raise DimensionMismatch("rows of A must have length %d and match b" % dim)
        return cls(A, b, dim)

    @classmethod
    def box(cls, lo, hi) -> "Polyhedron":
        d = len(lo)
        A, b = [], []
        for j in range(d):
            e = [0] * d
            e[j] = 1
            A.append(e)
            b.append(hi[j])
            A.append([-v for v in e])
            b.append(-as_rational(lo[j]))
        return cls.from_rows(A, b, d)

    def contains(self, x) -> bool:
        return all(dot(row, x) <= bi for row, bi in zip(self.A, self.b))

    def intersect(self, A, b) -> "Polyhedron":
        return Polyhedron.from_rows(list(self.A) + list(A), list(self.b) + list(b), self.dim)

    @cached_property
    def feasibility(self) -> LpOutcome:
        return lp_solve(self, None)

    @property
    def is_empty(self) -> bool:
        return isinstance(self.feasibility, Infeasible)

    @cached_property
    def recession_rank(self) -> int:
        return rank(self.A) if self.A else 0

    @cached_property
    def bounds(self) -> tuple:
        """Per-coordinate (min, max), None for an infinite side."""
        if self.is_empty:
            raise EmptyPolyhedron("polyhedron is empty")
        out = []
        for j in range(self.dim):
            e = [0] * self.dim
            e[j] = 1
            hi = lp_solve(self, e, "max")
            lo = lp_solve(self, e, "min")
            out.append((lo.value if isinstance(lo, Feasible) else None,
                        hi.value if isinstance(hi, Feasible) else None))
        return tuple(out)

    @property
    def is_bounded(self) -> bool:
        if self.is_empty:
            return True
        return all(lo is not None and hi is not None for lo, hi in self.bounds)

    @cached_property
    def vertices(self) -> frozenset:
        return vertices(self)


def lp_solve(poly: Polyhedron, objective, direction: str = "max") -> LpOutcome:
    if objective is not None and len(objective) != poly.dim:
        raise DimensionMismatch("objective has length %d, polyhedron dim %d" % (len(objective), poly.dim))
    if direction not in ("max", "min"):
        raise ValueError("direction must be 'max' or 'min'")
    if not poly.A:
        if objective is not None and any(objective):
            ray = tuple(as_rational(c) if direction == "max" else -as_rational(c) for c in objective)
            return Unbounded(tuple([Fraction(0)] * poly.dim), ray)
        return Feasible(tuple([Fraction(0)] * poly.dim), Fraction(0), ())
    return solve_lp(poly.A, poly.b, objective, maximize=(direction == "max"))


def width_along(poly: Polyhedron, u) -> Optional[Fraction]:
    """``max u^T x - min u^T x`` over the polyhedron; None means +infinity."""
    if len(u) != poly.dim:
        raise DimensionMismatch("direction has wrong length")
    if not any(u):
        raise ValueError("direction must be nonzero")
    hi = lp_solve(poly, u, "max")
    if isinstance(hi, Infeasible):
        raise EmptyPolyhedron("width of an empty polyhedron")
    lo = lp_solve(poly, u, "min")
    if isinstance(hi, Unbounded) or isinstance(lo, Unbounded):
        return None
    return hi.value - lo.value


def operator_norm_upper(A) -> Fraction:
    """Rational upper bound on the spectral norm: the Frobenius norm,
    rounded up to a multiple of 1/64 unless it is exactly rational."""
    s = sum(as_rational(a) ** 2 for row in A for a in row)
    return sqrt_upper(s, 64)


# ---------------------------------------------------------------------------
# double description


def _dd_cone(G, d):
    """Extreme rays of the pointed cone ``{z in Q^d : G z <= 0}``.

    Returns a list of (ray, zero_set) with ray a primitive integer tuple.
    Raises ValueError when the cone is not pointed.
    """
    Gq = [[to_mpq(a) for a in row] for row in G]
    # initial simplicial cone from d independent rows
    chosen = []
    basis_rows = []
    for i, row in enumerate(Gq):
        trial = basis_rows + [list(row)]
        if len(_row_echelon([list(r) for r in trial])[1]) == len(trial):
            basis_rows.append(list(row))
            chosen.append(i)
            if len(chosen) == d:
                break
    if len(chosen) < d:
        raise ValueError("cone is not pointed")
    # rays: columns of -inverse of the chosen block
    rays = []
    for j in range(d):
        e = [0] * d
        e[j] = -1
        r = solve_linear(basis_rows, e)
        rays.append(primitive(r))
    processed = list(chosen)

    def zero_set(r):
        return frozenset(i for i in processed if dot(G[i], r) == 0)

    ray_list = [(r, zero_set(r)) for r in rays]
    for i in range(len(G)):
        if i in chosen:
            continue
        row = G[i]
        vals = [dot(row, r) for r, _ in ray_list]
        pos = [j for j, v in enumerate(vals) if v > 0]
        neg = [j for j, v in enumerate(vals) if v < 0]
        zer = [j for j, v in enumerate(vals) if v == 0]
        new = []
        for jp in pos:
            rp, zp = ray_list[jp]
            for jn in neg:
                rn, zn = ray_list[jn]
                common = zp & zn
                if len(common) < d - 2:
                    continue
                adjacent = True
                for jo, (ro, zo) in enumerate(ray_list):
                    if jo != jp and jo != jn and common <= zo:
                        adjacent = False
                        break
                if not adjacent:
                    continue
                ap, an = vals[jp], vals[jn]
                comb = [ap * a - an * bb for a, bb in zip(rn, rp)]
                new.append((primitive(comb), common))
        processed.append(i)
        kept = [ray_list[j] for j in neg + zer]
        kept = [(r, z | ({i} if dot(row, r) == 0 else frozenset())) for r, z in kept]
        ray_list = kept + [(r, z | {i}) for r, z in new]
    # canonical order, dedupe
    seen = {}
    for r, z in ray_list:
        seen.setdefault(r, z)
    return sorted(seen.items())


def double_description(poly: Polyhedron):
    """(vertices, extreme recession rays) of a pointed polyhedron.

    Vertices are Fraction tuples; rays are primitive integer tuples.
    Raises ValueError when the polyhedron contains a line.
    """
    d = poly.dim
    G = [list(row) + [-bi] for row, bi in zip(poly.A, poly.b)]
    G.append([0] * d + [-1])
    rays = _dd_cone(G, d + 1)
    verts, rec = set(), set()
    for r, _ in rays:
        t = r[d]
        if t > 0:
            verts.add(tuple(Fraction(a, t) for a in r[:d]))
        elif t == 0:
            rec.add(tuple(r[:d]))
    return frozenset(verts), frozenset(rec)


def vertices(poly: Polyhedron) -> frozenset:
    """Vertex set via double description; empty for unpointed polyhedra."""
    if poly.is_empty:
        raise EmptyPolyhedron("vertices of an empty polyhedron")
    if poly.recession_rank < poly.dim:
        return frozenset()
    return double_description(poly)[0]


def extreme_rays(poly: Polyhedron) -> frozenset:
    if poly.recession_rank < poly.dim:
        raise ValueError("polyhedron contains a line")
    return double_description(poly)[1]


def brute_force_vertices(poly: Polyhedron) -> frozenset:
    """Test oracle: intersect every dim-subset of constraint rows."""
    out = set()
    d = poly.dim
    for idx in combinations(range(len(poly.A)), d):
        M = [poly.A[i] for i in idx]
        v = solve_linear(M, [poly.b[i] for i in idx])
        if v is not None and poly.contains(v):
            out.add(tuple(v))
    return frozenset(out)
