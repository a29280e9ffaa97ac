"""Certified feasibility kernel for degree-2 polynomial systems over the reals.

Search is branch-and-prune over a box of *branch* variables, a vertex
cover of the graph of products.  Once the branch variables are fixed every
row is linear in the remaining variables, which may be upper-unbounded.

Per box:

* exact interval evaluation may prove a row unsatisfiable;
* a McCormick linear relaxation may be infeasible, giving Farkas
  multipliers over explicitly described relaxation rows;
* otherwise the branch values of the relaxation optimum (and of the box
  centre) are fixed and a margin-maximising LP in the remaining variables
  produces a candidate.  Only points that pass :func:`check_witness` are
  returned.

Refutations are bisection trees whose leaves carry certificates, so the
leaves tile the root box by construction.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .geometry import Feasible, Infeasible, as_rational, solve_lp

log = logging.getLogger(__name__)

INF = None  # bound marker for an infinite side


class KernelExhausted(RuntimeError):
    """Node or resolution budget hit before a verdict was certified."""


@dataclass(frozen=True)
class PolyRow:
    """``sum lin + sum quad <= rhs``; ``quad`` keys are (i, j) with i <= j."""

    lin: tuple
    quad: tuple
    rhs: Fraction
    weakenable: bool = False
    label: str = ""

    @classmethod
    def make(cls, lin=(), quad=(), rhs=0, weakenable=False, label="", sense="<="):
        ld, qd = {}, {}
        for v, c in lin:
            c = as_rational(c)
            if c:
                ld[v] = ld.get(v, 0) + c
        for (i, j), c in quad:
            c = as_rational(c)
            if i > j:
                i, j = j, i
            if c:
                qd[(i, j)] = qd.get((i, j), 0) + c
        rhs = as_rational(rhs)
        if sense == ">=":
            ld = {k: -v for k, v in ld.items()}
            qd = {k: -v for k, v in qd.items()}
            rhs = -rhs
        elif sense != "<=":
            raise ValueError("sense must be '<=' or '>='")
        return cls(tuple(sorted((k, v) for k, v in ld.items() if v)),
                   tuple(sorted((k, v) for k, v in qd.items() if v)),
                   rhs, weakenable, label)

    def evaluate(self, point) -> Fraction:
        s = Fraction(0)
        for v, c in self.lin:
            s += c * point[v]
        for (i, j), c in self.quad:
            s += c * point[i] * point[j]
        return s


@dataclass(frozen=True)
class RealProblem:
    names: tuple
    lo: tuple  # finite Fractions
    hi: tuple  # Fractions or None (+infinity)
    rows: tuple
    delta: Fraction
    branch: Optional[tuple] = None  # vertex cover hint

    def __post_init__(self):
        k = len(self.names)
        if len(self.lo) != k or len(self.hi) != k:
            raise ValueError("bounds do not match variables")
        if self.delta <= 0:
            raise ValueError("weakening budget must be positive")
        for r in self.rows:
            for v, _ in r.lin:
                if not 0 <= v < k:
                    raise ValueError("row mentions unknown variable %r" % (v,))
            for (i, j), _ in r.quad:
                if not (0 <= i < k and 0 <= j < k):
                    raise ValueError("row mentions unknown variable")
        for lo, hi in zip(self.lo, self.hi):
            if lo is None:
                raise ValueError("every variable needs a finite lower bound")
            if hi is not None and hi < lo:
                raise ValueError("empty variable range")

    @property
    def nvars(self) -> int:
        return len(self.names)

    def quad_terms(self) -> list:
        return sorted({t for r in self.rows for t, _ in r.quad})


# ---------------------------------------------------------------------------
# witness checking


@dataclass(frozen=True)
class ExactPass:
    pass


@dataclass(frozen=True)
class WeakPass:
    worst_row: int
    excess: Fraction


@dataclass(frozen=True)
class Fail:
    row: int  # -1 for a bound violation
    reason: str = ""


def check_witness(p: RealProblem, point) -> object:
    if len(point) != p.nvars:
        raise ValueError("point has wrong dimension")
    point = [as_rational(v) for v in point]
    for k, v in enumerate(point):
        if v < p.lo[k] or (p.hi[k] is not None and v > p.hi[k]):
            return Fail(-1, "variable %s out of bounds" % p.names[k])
    worst, worst_row = Fraction(0), -1
    for i, r in enumerate(p.rows):
        ex = r.evaluate(point) - r.rhs
        if ex <= 0:
            continue
        if not r.weakenable or ex > p.delta:
            return Fail(i, "row %d exceeds by %s" % (i, ex))
        if ex > worst:
            worst, worst_row = ex, i
    if worst_row < 0:
        return ExactPass()
    return WeakPass(worst_row, worst)


# ---------------------------------------------------------------------------
# interval arithmetic with None as infinity


def _imul(a, b):
    """Product of intervals (lo, hi) with None for -inf/+inf respectively."""
    (al, ah), (bl, bh) = a, b
    cands = []
    for x, xinf in ((al, -1), (ah, 1)):
        for y, yinf in ((bl, -1), (bh, 1)):
            if x is None and y is None:
                cands.append(xinf * yinf * _BIG)
            elif x is None:
                cands.append(0 if y == 0 else xinf * (1 if y > 0 else -1) * _BIG)
            elif y is None:
                cands.append(0 if x == 0 else yinf * (1 if x > 0 else -1) * _BIG)
            else:
                cands.append(x * y)
    lo, hi = min(cands), max(cands)
    return (None if lo <= -_BIG else lo, None if hi >= _BIG else hi)


_BIG = 10 ** 400  # stands in for infinity inside _imul only


def _row_lower(row: PolyRow, bounds) -> Optional[Fraction]:
    """Lower bound of the row's left side over the box (None = -inf)."""
    total = Fraction(0)
    for v, c in row.lin:
        lo, hi = bounds[v]
        b = lo if c > 0 else hi
        if b is None:
            return None
        total += c * b
    for (i, j), c in row.quad:
        if i == j:
            lo, hi = bounds[i]
            if lo is not None and lo >= 0:
                sq = (lo * lo, None if hi is None else hi * hi)
            elif hi is not None and hi <= 0:
                sq = (hi * hi, None if lo is None else lo * lo)
            else:
                top = None if lo is None or hi is None else max(lo * lo, hi * hi)
                sq = (Fraction(0), top)
            iv = sq
        else:
            iv = _imul(bounds[i], bounds[j])
        lo_, hi_ = iv
        b = lo_ if c > 0 else hi_
        if b is None:
            return None
        total += c * b
    return total


# ---------------------------------------------------------------------------
# McCormick relaxation rows with descriptors


def relaxation_rows(p: RealProblem, bounds):
    """Rows of the linear relaxation over ``bounds``.

    Returns (terms, rows) where ``terms`` lists the product terms (index
    ``nvars + t`` in the LP) and rows are (descriptor, coeffs, rhs).
    Descriptors: ("lo", v), ("hi", v), ("row", r), ("env", t, kind).
    """
    nv = p.nvars
    terms = p.quad_terms()
    tindex = {t: nv + k for k, t in enumerate(terms)}
    width = nv + len(terms)
    rows = []

    def add(desc, coef: dict, rhs):
        vec = [Fraction(0)] * width
        for k, c in coef.items():
            vec[k] += c
        rows.append((desc, vec, Fraction(rhs)))

    for v in range(nv):
        lo, hi = bounds[v]
        add(("lo", v), {v: -1}, -lo)
        if hi is not None:
            add(("hi", v), {v: 1}, hi)
    for ridx, r in enumerate(p.rows):
        coef = {}
        for v, c in r.lin:
            coef[v] = coef.get(v, 0) + c
        for t, c in r.quad:
            coef[tindex[t]] = coef.get(tindex[t], 0) + c
        add(("row", ridx), coef, r.rhs)
    for t in terms:
        for kind, coef, rhs in envelope(t, bounds, tindex[t]):
            add(("env", t, kind), coef, rhs)
    return terms, rows


def envelope(t, bounds, w):
    """Valid linear inequalities for ``w = x_i x_j`` over the box."""
    i, j = t
    li, ui = bounds[i]
    out = []
    if i == j:
        # w >= 2 a x - a^2 at finite endpoints; secant above
        for kind, a in (("tl", li), ("tu", ui)):
            if a is not None:
                out.append((kind, {i: 2 * a, w: -1}, a * a))
        if ui is not None:
            out.append(("sec", {w: 1, i: -(li + ui)}, -li * ui))
        return out
    lj, uj = bounds[j]
    # (x_i - l_i)(x_j - l_j) >= 0  ->  -w + l_i x_j + l_j x_i <= l_i l_j
    out.append(("ll", {w: -1, j: li, i: lj}, li * lj))
    if ui is not None and uj is not None:
        out.append(("uu", {w: -1, j: ui, i: uj}, ui * uj))
    if uj is not None:
        # (x_i - l_i)(u_j - x_j) >= 0  ->  w - u_j x_i - l_i x_j <= -l_i u_j
        out.append(("lu", {w: 1, i: -uj, j: -li}, -li * uj))
    if ui is not None:
        out.append(("ul", {w: 1, j: -ui, i: -lj}, -ui * lj))
    return out


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class Witness:
    point: tuple
    weakened: bool


@dataclass(frozen=True)
class Refuted:
    tree: dict  # {"box": ..., "split": ..., "children": [...]} or leaf with "cert"
    boxes: int


@dataclass
class KernelStats:
    boxes: int = 0
    lps: int = 0
    depth: int = 0


def _greedy_cover(p: RealProblem) -> tuple:
    edges = [t for t in p.quad_terms() if t[0] != t[1]]
    cover = {i for (i, j) in p.quad_terms() if i == j}
    edges = [e for e in edges if e[0] not in cover and e[1] not in cover]
    while edges:
        deg = {}
        for i, j in edges:
            for v in (i, j):
                if p.hi[v] is not None:
                    deg[v] = deg.get(v, 0) + 1
        if not deg:
            raise ValueError("product term without a bounded factor")
        v = min(deg, key=lambda k: (-deg[k], k))
        cover.add(v)
        edges = [e for e in edges if v not in e]
    return tuple(sorted(cover))


def branch_variables(p: RealProblem) -> tuple:
    cover = p.branch if p.branch is not None else _greedy_cover(p)
    for i, j in p.quad_terms():
        if i not in cover and j not in cover:
            raise ValueError("branch variables do not cover product (%d, %d)" % (i, j))
    for v in cover:
        if p.hi[v] is None:
            raise ValueError("branch variable %s is unbounded" % p.names[v])
    return tuple(sorted(cover))


def decide(p: RealProblem, max_boxes: int = 20000, min_width: Optional[Fraction] = None,
           deadline: Optional[float] = None, stats: Optional[KernelStats] = None):
    """Return Witness or Refuted; raise KernelExhausted on budget."""
    if stats is None:
        stats = KernelStats()
    cover = branch_variables(p)
    if min_width is None:
        min_width = p.delta / 64
    root = [(p.lo[v], p.hi[v]) for v in range(p.nvars)]
    # explicit stack of (bounds, depth, path); tree assembled from leaves
    nodes = {}
    stack = [((), root, 0)]
    while stack:
        path, bounds, depth = stack.pop()
        stats.boxes += 1
        stats.depth = max(stats.depth, depth)
        if stats.boxes > max_boxes:
            raise KernelExhausted("box budget %d exhausted" % max_boxes)
        if deadline is not None and time.monotonic() > deadline:
            raise KernelExhausted("deadline reached")
        res = _process_box(p, bounds, cover, stats)
        if isinstance(res, Witness):
            return res
        if res is not None:
            nodes[path] = {"cert": res}
            continue
        v = _pick_split(bounds, cover, depth)
        lo, hi = bounds[v]
        if hi - lo < min_width:
            raise KernelExhausted("resolution limit reached without a verdict")
        mid = (lo + hi) / 2
        left = list(bounds)
        right = list(bounds)
        left[v] = (lo, mid)
        right[v] = (mid, hi)
        nodes[path] = {"split": v, "at": mid}
        stack.append((path + (1,), right, depth + 1))
        stack.append((path + (0,), left, depth + 1))

    def build(path, bounds):
        node = nodes[path]
        out = {"box": [(lo, hi) for v, (lo, hi) in enumerate(bounds) if v in cover]}
        if "cert" in node:
            out["cert"] = node["cert"]
            return out
        v, mid = node["split"], node["at"]
        lo, hi = bounds[v]
        lb, rb = list(bounds), list(bounds)
        lb[v] = (lo, mid)
        rb[v] = (mid, hi)
        out["split"] = v
        out["at"] = mid
        out["children"] = [build(path + (0,), lb), build(path + (1,), rb)]
        return out

    tree = build((), root)
    tree["cover"] = list(cover)
    return Refuted(tree, sum(1 for n in nodes.values() if "cert" in n))


def _pick_split(bounds, cover, depth):
    best, bw = None, None
    k = len(cover)
    # widest first; ties broken round-robin starting at depth mod k
    order = [cover[(depth + t) % k] for t in range(k)]
    for v in order:
        lo, hi = bounds[v]
        w = hi - lo
        if bw is None or w > bw:
            best, bw = v, w
    return best


def _process_box(p: RealProblem, bounds, cover, stats):
    for ridx, r in enumerate(p.rows):
        low = _row_lower(r, bounds)
        if low is not None and low > r.rhs:
            return {"kind": "interval", "row": ridx}
    terms, rows = relaxation_rows(p, bounds)
    A = [vec for _, vec, _ in rows]
    b = [rhs for _, _, rhs in rows]
    stats.lps += 1
    res = solve_lp(A, b, None)
    if isinstance(res, Infeasible):
        mult = [(rows[k][0], lam) for k, lam in enumerate(res.certificate) if lam]
        return {"kind": "farkas", "multipliers": mult}
    candidates = [tuple(res.point[v] for v in cover)]
    centre = tuple((bounds[v][0] + bounds[v][1]) / 2 for v in cover)
    if centre != candidates[0]:
        candidates.append(centre)
    weak = None
    for cand in candidates:
        stats.lps += 1
        pt = _fix_and_solve(p, bounds, cover, cand)
        if pt is None:
            continue
        verdict = check_witness(p, pt)
        if isinstance(verdict, ExactPass):
            return Witness(tuple(pt), False)
        if isinstance(verdict, WeakPass) and weak is None:
            weak = Witness(tuple(pt), True)
    if weak is not None:
        return weak
    return None


def _fix_and_solve(p: RealProblem, bounds, cover, values):
    """With branch variables fixed, maximise the common slack of the
    weakenable rows over the remaining variables.  Returns a full point
    or None when even the ``delta``-weakened rows are infeasible."""
    fixed = dict(zip(cover, values))
    free = [v for v in range(p.nvars) if v not in fixed]
    pos = {v: k for k, v in enumerate(free)}
    t = len(free)  # slack variable column
    A, b = [], []
    for v in free:
        lo, hi = bounds[v]
        row = [Fraction(0)] * (t + 1)
        row[pos[v]] = Fraction(-1)
        A.append(row)
        b.append(-lo)
        if hi is not None:
            row = [Fraction(0)] * (t + 1)
            row[pos[v]] = Fraction(1)
            A.append(row)
            b.append(hi)
    for r in p.rows:
        row = [Fraction(0)] * (t + 1)
        const = Fraction(0)
        for v, c in r.lin:
            if v in fixed:
                const += c * fixed[v]
            else:
                row[pos[v]] += c
        for (i, j), c in r.quad:
            if i in fixed and j in fixed:
                const += c * fixed[i] * fixed[j]
            elif i in fixed:
                row[pos[j]] += c * fixed[i]
            else:
                row[pos[i]] += c * fixed[j]
        if r.weakenable:
            row[t] = Fraction(1)
        A.append(row)
        b.append(r.rhs - const)
    # -delta <= t <= 1
    row = [Fraction(0)] * (t + 1)
    row[t] = Fraction(1)
    A.append(row)
    b.append(Fraction(1))
    row = [Fraction(0)] * (t + 1)
    row[t] = Fraction(-1)
    A.append(row)
    b.append(p.delta)
    obj = [0] * t + [1]
    res = solve_lp(A, b, obj)
    if not isinstance(res, Feasible):
        return None
    point = [Fraction(0)] * p.nvars
    for v, val in fixed.items():
        point[v] = val
    for v in free:
        point[v] = res.point[pos[v]]
    return point


# ---------------------------------------------------------------------------
# certificate re-checking (search-independent)


def verify_refutation(p: RealProblem, ref: Refuted) -> bool:
    tree = ref.tree
    cover = tuple(tree.get("cover", ()))
    root = [(p.lo[v], p.hi[v]) for v in range(p.nvars)]
    return _verify_node(p, tree, root, cover)


def _verify_node(p, node, bounds, cover):
    if "cert" in node:
        return verify_box_certificate(p, bounds, node["cert"])
    v, mid = node["split"], as_rational(node["at"])
    if v not in cover:
        return False
    lo, hi = bounds[v]
    if not (lo <= mid <= hi):
        return False
    lb, rb = list(bounds), list(bounds)
    lb[v] = (lo, mid)
    rb[v] = (mid, hi)
    kids = node.get("children", [])
    return len(kids) == 2 and _verify_node(p, kids[0], lb, cover) and _verify_node(p, kids[1], rb, cover)


def verify_box_certificate(p: RealProblem, bounds, cert) -> bool:
    if cert["kind"] == "interval":
        r = p.rows[cert["row"]]
        low = _row_lower(r, bounds)
        return low is not None and low > r.rhs
    if cert["kind"] == "farkas":
        nv = p.nvars
        terms = p.quad_terms()
        tindex = {t: nv + k for k, t in enumerate(terms)}
        width = nv + len(terms)
        combo = [Fraction(0)] * width
        rhs = Fraction(0)
        for desc, lam in cert["multipliers"]:
            lam = as_rational(lam)
            if lam < 0:
                return False
            row = _describe_row(p, bounds, desc, tindex, width)
            if row is None:
                return False
            vec, r = row
            for k in range(width):
                combo[k] += lam * vec[k]
            rhs += lam * r
        return not any(combo) and rhs < 0
    return False


def _describe_row(p, bounds, desc, tindex, width):
    vec = [Fraction(0)] * width
    kind = desc[0]
    if kind == "lo":
        v = desc[1]
        vec[v] = Fraction(-1)
        return vec, -bounds[v][0]
    if kind == "hi":
        v = desc[1]
        if bounds[v][1] is None:
            return None
        vec[v] = Fraction(1)
        return vec, bounds[v][1]
    if kind == "row":
        r = p.rows[desc[1]]
        for v, c in r.lin:
            vec[v] += c
        for t, c in r.quad:
            vec[tindex[t]] += c
        return vec, r.rhs
    if kind == "env":
        t, which = tuple(desc[1]), desc[2]
        if t not in tindex:
            return None
        for k, coef, rhs in envelope(t, bounds, tindex[t]):
            if k == which:
                for idx, c in coef.items():
                    vec[idx] += c
                return vec, Fraction(rhs)
        return None
    return None
