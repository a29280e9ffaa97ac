"""Gap satisfiability for bounded MIB systems.

``solve`` answers Sat (with an exactly checked assignment), Unsat (with a
refutation DAG) or Unknown (budget).  Unsat certifies that no assignment
has slack ``eps``; Sat only promises a genuine solution.

Per standard-form node with m integer variables:

* m = 0, or no product terms: a margin LP over y decides the node;
* the real relaxation with slack ``eps`` is handed to the kernel; a
  refutation closes the node;
* otherwise a lazily grown set of directions ``U0`` drives the relaxed
  system.  Witnesses are rounded by integer search in ``P(y*)``; when that
  fails a thin direction of ``P(y*)`` joins ``U0``.  A refutation splits
  the node into ``x_i = 0`` children and hyperplane children
  ``u^T x = b`` (u in U0, ``|b| <= omega_hat (1 + M/eps)`` where ``M``
  bounds ``b_i^T y - c_i`` over the real block).

The capture argument behind the split holds for any subset of directions,
so soundness of Unsat never depends on the flatness table.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .geometry import (
    Feasible,
    Infeasible,
    Polyhedron,
    Unbounded,
    as_rational,
    lp_solve,
    solve_lp,
    width_along,
)
from .realfeas import (
    KernelExhausted,
    KernelStats,
    PolyRow,
    RealProblem,
    Refuted,
    Witness,
    decide,
)
from .relaxation import build_relaxed, delta_s, directions, flatness_bound
from .semilinear import decompose
from .system import (
    Assignment,
    Bounded,
    MibSystem,
    SatNoSlack,
    SatWithSlack,
    UnboundedSystem,
    Violated,
    check_assignment,
    is_bounded,
    substitute,
    to_standard_form,
    y_box,
)

log = logging.getLogger(__name__)


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class Budget:
    ms: Optional[int] = 60000
    max_nodes: int = 20000
    kernel_boxes: int = 3000
    rounding_nodes: int = 3000
    rounding_box: int = 1 << 16
    direction_norm_sq: int = 40
    cegar_rounds: int = 16
    quick_shell: int = 2
    quick_points: int = 200
    # False skips the shell search and the presolve so every node goes
    # through the relaxed problem (used to exercise the split path)
    shortcuts: bool = True
    omega_table: Optional[dict] = None


@dataclass(frozen=True)
class Sat:
    assignment: Assignment
    margin: Fraction


@dataclass(frozen=True)
class Unsat:
    certificate: dict


@dataclass(frozen=True)
class Unknown:
    reason: str


@dataclass
class EngineStats:
    nodes: int = 0
    lps: int = 0
    kernel_calls: int = 0
    kernel_boxes: int = 0
    splits: int = 0
    refutations: list = field(default_factory=list)  # (system, U0, kappa2_eff)


# ---------------------------------------------------------------------------
# linear pieces


def margin_lp(s: MibSystem, x, cap=Fraction(1)):
    """Max-margin y for fixed integer x.

    Returns (margin, y) where margin < 0 means no solution at x, or None
    when the real block is empty.
    """
    n = s.n
    A, b = [], []
    for r in s.rows:
        A.append(list(r.y_coefficients(x)) + [1])
        b.append(r.c)
    for Drow, ei in zip(s.D, s.e):
        A.append(list(Drow) + [0])
        b.append(ei)
    A.append([0] * n + [1])
    b.append(cap)
    res = solve_lp(A, b, [0] * n + [1])
    if isinstance(res, Infeasible):
        return None
    if isinstance(res, Unbounded):  # cannot happen with the cap row
        raise AssertionError("margin LP unbounded")
    y = tuple(res.point[:n])
    mg = min((r.c - r.value(x, y) for r in s.rows), default=cap)
    return mg, y


def slack_farkas(s: MibSystem, x, eps):
    """Farkas multipliers refuting ``g_i(x)^T y <= c_i - eps, Dy <= e``."""
    A, b = [], []
    for r in s.rows:
        A.append(list(r.y_coefficients(x)))
        b.append(r.c - eps)
    for Drow, ei in zip(s.D, s.e):
        A.append(list(Drow))
        b.append(ei)
    res = solve_lp(A, b, None)
    if isinstance(res, Infeasible):
        return list(res.certificate)
    return None


def interval_rejects(s: MibSystem, x, box) -> bool:
    """Cheap test: some row exceeds ``c`` for every y in the box."""
    for r in s.rows:
        g = r.y_coefficients(x)
        low = 0
        for gj, (lo, hi) in zip(g, box):
            if gj > 0:
                low += gj * lo
            elif gj < 0:
                low += gj * hi
        if low > r.c:
            return True
    return False


def integer_point(A, b, m: int, box: int, max_nodes: int, prefer=None, check=None):
    """Some integer x with A x <= b and 0 <= x <= box, or None.

    Depth-first LP branch-and-bound; raises BudgetExceeded past
    ``max_nodes``.  ``prefer`` is an optional real point used to order
    branches; ``check`` is called once per node (time limits).
    """
    rows = [list(r) for r in A]
    rhs = list(b)
    unit = [[1 if a == j else 0 for a in range(m)] for j in range(m)]
    stack = [((0,) * m, (box,) * m)]
    nodes = 0
    obj = [-1] * m  # prefer small points
    while stack:
        lo, hi = stack.pop()
        nodes += 1
        if nodes > max_nodes:
            raise BudgetExceeded("integer search node budget")
        if check is not None:
            check()
        bA = rows + [[-v for v in u] for u in unit] + unit
        bb = rhs + [-v for v in lo] + list(hi)
        res = solve_lp(bA, bb, obj)
        if not isinstance(res, Feasible):
            continue
        x = res.point
        frac = next((j for j in range(m) if x[j].denominator != 1), None)
        if frac is None:
            return tuple(int(v) for v in x)
        v = x[frac]
        down = (lo, hi[:frac] + (math.floor(v),) + hi[frac + 1:])
        up = (lo[:frac] + (math.ceil(v),) + lo[frac + 1:], hi)
        if prefer is not None and prefer[frac] - math.floor(v) > Fraction(1, 2):
            stack += [down, up]
        else:
            stack += [up, down]
    return None


def p_of_y(s: MibSystem, y):
    """Rows of ``P(y) = {x >= 0 : x^T A_i y + b_i^T y <= c_i}`` (x >= 0 excluded)."""
    A, b = [], []
    for r in s.rows:
        A.append([sum(a * yj for a, yj in zip(Ai, y)) for Ai in r.A])
        b.append(r.c - sum(bj * yj for bj, yj in zip(r.b, y)))
    return A, b


def excess_bound(s: MibSystem):
    """M = max_i max_{y in Y} (b_i^T y - c_i)^+ with dual certificates."""
    M = Fraction(0)
    certs = []
    poly = s.y_polyhedron()
    for i, r in enumerate(s.rows):
        if s.n == 0:
            val = Fraction(-r.c)
            certs.append({"row": i, "value": val, "duals": []})
        else:
            res = lp_solve(poly, list(r.b), "max")
            if not isinstance(res, Feasible):
                raise UnboundedSystem("excess LP is not bounded")
            val = res.value - r.c
            certs.append({"row": i, "value": val, "duals": list(res.duals)})
        M = max(M, val)
    return M, certs


# ---------------------------------------------------------------------------
# the engine


class Engine:
    def __init__(self, eps, budget: Optional[Budget] = None):
        self.eps = as_rational(eps)
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        self.budget = budget or Budget()
        self.deadline = None
        if self.budget.ms is not None:
            self.deadline = time.monotonic() + self.budget.ms / 1000
        self.stats = EngineStats()
        self.memo = {}
        self.nodes = []  # certificate node table

    # -- budget ---------------------------------------------------------

    def _tick(self):
        self.stats.nodes += 1
        if self.stats.nodes > self.budget.max_nodes:
            raise BudgetExceeded("node budget %d exhausted" % self.budget.max_nodes)
        self._check_time()

    def _check_time(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise BudgetExceeded("time budget exhausted")

    def _remaining(self):
        return None if self.deadline is None else self.deadline

    def _add(self, node: dict) -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    # -- public ---------------------------------------------------------

    def solve(self, s: MibSystem):
        bd = is_bounded(s)
        if not isinstance(bd, Bounded):
            raise UnboundedSystem("real block unbounded along %s" % (bd.ray,))
        pieces = to_standard_form(s)
        results = []
        unknown = None
        # quick shell search first: cheap and frequently decisive
        for piece in pieces if self.budget.shortcuts else ():
            try:
                hit = self._shell_search(piece.system, 0, self._quick_shell(piece.system.m))
            except BudgetExceeded:
                hit = None
            if hit is not None:
                return self._lift_sat(s, piece, hit)
        for piece in pieces:
            try:
                status, payload = self._node(piece.system)
            except BudgetExceeded as exc:
                status, payload = "unknown", str(exc)
            if status == "sat":
                return self._lift_sat(s, piece, payload)
            if status == "unknown":
                unknown = unknown or payload
            results.append((piece, status, payload))
        if unknown is None:
            cert = {
                "eps": self.eps,
                "pieces": [{"base": list(p.base), "periods": [list(c) for c in p.periods], "node": nid}
                           for p, _, nid in results],
                "nodes": self.nodes,
            }
            return Unsat(cert)
        # keep looking for a witness with the remaining time
        shell = max(self._quick_shell(p.system.m) for p in pieces) + 1 if pieces else 0
        try:
            while True:
                for piece in pieces:
                    hit = self._shell_search(piece.system, shell, shell)
                    if hit is not None:
                        return self._lift_sat(s, piece, hit)
                shell += 1
                if self.deadline is None and shell > 64:
                    break
        except BudgetExceeded:
            pass
        return Unknown(unknown)

    def _quick_shell(self, m: int) -> int:
        """Largest k with (k+1)^m <= quick_points, at least quick_shell."""
        k = self.budget.quick_shell
        while (k + 2) ** max(m, 1) <= self.budget.quick_points:
            k += 1
        return k

    def _lift_sat(self, s, piece, hit):
        z, y = hit
        x = piece.lift(z)
        a = Assignment(tuple(int(v) for v in x), tuple(y))
        res = check_assignment(s, a, self.eps)
        if isinstance(res, Violated):
            raise AssertionError("lifted witness fails: %s" % res)
        return Sat(a, res.margin)

    # -- shells -----------------------------------------------------------

    def _shell_search(self, s: MibSystem, k_lo: int, k_hi: int):
        """Integer x with max-norm in [k_lo, k_hi] plus max-margin y."""
        import itertools

        box = y_box(s)
        if box is None:
            return None
        best = None
        for k in range(k_lo, k_hi + 1):
            for x in itertools.product(range(k + 1), repeat=s.m):
                if s.m and max(x) != k:
                    continue
                self._check_time()
                if interval_rejects(s, x, box):
                    continue
                self.stats.lps += 1
                res = margin_lp(s, x, max(Fraction(1), self.eps))
                if res is None:
                    return None
                mg, y = res
                if mg >= self.eps:
                    return x, y
                if mg >= 0 and best is None:
                    best = (x, y)
            if s.m == 0:
                break
        return best

    # -- nodes ------------------------------------------------------------

    def _node(self, s: MibSystem):
        # exact structure: base certificates index rows by position
        key = (s.m, s.n, s.rows, s.D, s.e)
        if key in self.memo:
            return self.memo[key]
        self._tick()
        out = self._node_inner(s)
        if out[0] != "unknown":
            self.memo[key] = out
        return out

    def _base_case(self, s: MibSystem, note: str):
        x = (0,) * s.m
        res = margin_lp(s, x, max(Fraction(1), self.eps))
        self.stats.lps += 1
        if res is not None and res[0] >= 0:
            return "sat", (x, res[1])
        lam = slack_farkas(s, x, self.eps)
        if lam is None:
            raise AssertionError("base case without Farkas certificate")
        return "unsat", self._add({"kind": "base", "note": note, "farkas": lam})

    def _node_inner(self, s: MibSystem):
        if y_box(s) is None:
            lam = slack_farkas(s, (0,) * s.m, self.eps)
            return "unsat", self._add({"kind": "base", "note": "empty real block", "farkas": lam})
        if s.m == 0:
            return self._base_case(s, "no integer variables")
        if all(r.is_linear for r in s.rows):
            # x does not occur: x = 0 is as good as any other choice
            return self._base_case(s, "no product terms")
        if not self.budget.shortcuts:
            return self._cegar(s)
        # relaxation with slack eps, real x >= 0
        pre = self._presolve_problem(s)
        ref = self._kernel(pre)
        if isinstance(ref, Refuted):
            return "unsat", self._add({"kind": "presolve", "refutation": ref.tree})
        if isinstance(ref, Witness):
            hit = self._round(s, ref.point[: s.n], max_box=64, max_nodes=200)
            if hit is not None:
                return "sat", hit
        return self._cegar(s)

    def _presolve_problem(self, s: MibSystem) -> RealProblem:
        return presolve_problem(s, self.eps)

    def _kernel(self, prob: RealProblem):
        self.stats.kernel_calls += 1
        ks = KernelStats()
        try:
            return decide(prob, max_boxes=self.budget.kernel_boxes, deadline=self.deadline, stats=ks)
        except KernelExhausted as exc:
            self._check_time()
            return exc
        finally:
            self.stats.kernel_boxes += ks.boxes

    def _round(self, s: MibSystem, y, max_box: Optional[int] = None, max_nodes: Optional[int] = None):
        """Integer point of P(y*) in growing boxes, then re-optimised y."""
        A, b = p_of_y(s, y)
        limit = self.budget.rounding_box if max_box is None else max_box
        nodes = self.budget.rounding_nodes if max_nodes is None else max_nodes
        poly = Polyhedron.from_rows(A + [[-1 if i == j else 0 for i in range(s.m)] for j in range(s.m)],
                                    b + [0] * s.m, s.m)
        if poly.is_empty:
            return None
        top = None
        if poly.is_bounded:
            top = max(hi for _, hi in poly.bounds)
        R = 4
        while True:
            self._check_time()
            try:
                x = integer_point(A, b, s.m, R, nodes, check=self._check_time)
            except BudgetExceeded:
                return None
            if x is not None:
                res = margin_lp(s, x, max(Fraction(1), self.eps))
                if res is None or res[0] < 0:
                    # y* itself works, the LP must agree
                    raise AssertionError("rounded point has no y")
                return x, res[1]
            if top is not None and top <= R:
                return None
            if R >= limit:
                return None
            R *= 4

    def _thin_direction(self, s: MibSystem, y, omega_hat, known):
        A, b = p_of_y(s, y)
        A = A + [[-1 if i == j else 0 for i in range(s.m)] for j in range(s.m)]
        b = b + [0] * s.m
        poly = Polyhedron.from_rows(A, b, s.m)
        if poly.is_empty:
            return None
        best = None
        for u in directions(s.m, max_norm_sq=self.budget.direction_norm_sq):
            if u in known:
                continue
            self._check_time()
            w = width_along(poly, list(u))
            if w is not None and w < omega_hat:
                if best is None or w < best[1]:
                    best = (u, w)
                    if w < 1:
                        break
        return None if best is None else best[0]

    def _cegar(self, s: MibSystem):
        omega_hat = flatness_bound(s.m, self.budget.omega_table) + 1
        U0 = []
        for _ in range(self.budget.cegar_rounds):
            rp = build_relaxed(s, self.eps, dirs=U0, omega_hat=omega_hat)
            ref = self._kernel(rp.problem)
            if isinstance(ref, Refuted):
                return self._split(s, U0, omega_hat, ref)
            if not isinstance(ref, Witness):
                return "unknown", "relaxed kernel: %s" % ref
            y = rp.y_of(ref.point)
            hit = self._round(s, y, max_box=64, max_nodes=200)
            if hit is not None:
                return "sat", hit
            u = self._thin_direction(s, y, omega_hat, set(U0))
            if u is None:
                hit = self._round(s, y)
                if hit is not None:
                    return "sat", hit
                return "unknown", "rounding failed and no thin direction found"
            U0.append(u)
        return "unknown", "direction refinement limit reached"

    def _split(self, s: MibSystem, U0, omega_hat, ref: Refuted):
        self.stats.splits += 1
        M, mcerts = excess_bound(s)
        k2 = omega_hat * (1 + M / self.eps)
        self.stats.refutations.append((s, tuple(U0), k2))
        bmax = math.floor(k2)
        children = []
        m = s.m
        for i in range(m):
            P = [tuple(1 if a == j else 0 for a in range(m)) for j in range(m) if j != i]
            children.append(({"zero": i}, [((0,) * m, P)]))
        for u in U0:
            shift = sum(u)  # x = 1 + x'
            lo = -bmax
            hi = bmax
            if all(a >= 0 for a in u):
                lo = max(lo, shift)
            for bval in range(lo, hi + 1):
                C = [list(u), [-a for a in u]] + [[-1 if i == j else 0 for i in range(m)] for j in range(m)]
                d = [bval - shift, shift - bval] + [0] * m
                hls = decompose(C, d)
                pieces = []
                for pc in hls.pieces:
                    w = tuple(1 + a for a in pc.base)
                    pieces.append((w, list(pc.periods)))
                children.append(({"u": list(u), "b": bval}, pieces))
        out_children = []
        unknown = None
        for branch, pieces in children:
            recs = []
            for w, P in pieces:
                child = substitute(s, w, P)
                status, payload = self._node(child)
                if status == "sat":
                    z, y = payload
                    x = tuple(w[a] + sum(zj * col[a] for zj, col in zip(z, P)) for a in range(m))
                    return "sat", (x, y)
                if status == "unknown":
                    unknown = unknown or payload
                    continue
                recs.append({"base": list(w), "periods": [list(c) for c in P], "node": payload})
            out_children.append({"branch": branch, "pieces": recs})
        if unknown is not None:
            return "unknown", unknown
        return "unsat", self._add({
            "kind": "split",
            "directions": [list(u) for u in U0],
            "omega_hat": omega_hat,
            "excess": {"M": M, "rows": mcerts},
            "kappa2": k2,
            "refutation": ref.tree,
            "children": out_children,
        })


def presolve_problem(s: MibSystem, eps) -> RealProblem:
    """Real relaxation ``x >= 0`` real, bilinear rows ``<= c_i - eps``."""
    eps = as_rational(eps)
    box = y_box(s)
    n, m = s.n, s.m
    names = ["y%d" % j for j in range(n)] + ["x%d" % a for a in range(m)]
    lo = [bx[0] for bx in box] + [Fraction(0)] * m
    hi = [bx[1] for bx in box] + [None] * m
    rows = []
    for i, r in enumerate(s.rows):
        quad = [((j, n + a), c) for a, Ai in enumerate(r.A) for j, c in enumerate(Ai) if c]
        lin = [(j, c) for j, c in enumerate(r.b) if c]
        rows.append(PolyRow.make(lin, quad, r.c - eps, False, "row%d" % i))
    for i, (Drow, ei) in enumerate(zip(s.D, s.e)):
        rows.append(PolyRow.make([(j, c) for j, c in enumerate(Drow) if c], (), ei, False, "D%d" % i))
    return RealProblem(tuple(names), tuple(lo), tuple(hi), tuple(rows), delta_s(eps), tuple(range(n)))


def solve(s: MibSystem, eps, budget: Optional[Budget] = None):
    """Gap-satisfiability verdict for ``s`` at slack ``eps``."""
    eng = Engine(eps, budget)
    return eng.solve(s)
