"""Offline re-verification of solver artifacts.

This module deliberately avoids the search code: it evaluates witnesses
directly, rebuilds the relaxed and presolve problems from the system,
re-derives interval bounds and McCormick inequalities from scratch, and
walks the certificate DAG with its own substitution.  Shared pieces are
the exact LP (for variable bounds of the real block) and the integer
decomposition, whose output is compared piece by piece.

Every checker returns a list of problems; an empty list means "verified".
Certificates may be given in memory (ints and Fractions) or as decoded
JSON (strings); both are accepted.
"""

from __future__ import annotations

from fractions import Fraction

from .geometry import Feasible, as_rational, solve_lp
from .system import MibSystem


class Reject(Exception):
    pass


def _q(v) -> Fraction:
    try:
        return as_rational(v)
    except (TypeError, ValueError) as exc:
        raise Reject("bad number %r: %s" % (v, exc)) from None


def _i(v) -> int:
    q = _q(v)
    if q.denominator != 1:
        raise Reject("expected an integer, got %s" % q)
    return q.numerator


def _need(cond, msg):
    if not cond:
        raise Reject(msg)


# ---------------------------------------------------------------------------
# assignments


def evaluate(s: MibSystem, x, y):
    """Margins of every constraint block; raises Reject on violation.

    Returns the minimum bilinear margin (None without bilinear rows).
    """
    _need(len(x) == s.m and len(y) == s.n, "witness dimensions do not match the instance")
    for i, (row, di) in enumerate(zip(s.C, s.d)):
        lhs = 0
        for c, v in zip(row, x):
            lhs += c * v
        _need(lhs <= di, "integer row %d violated: %s > %s" % (i + 1, lhs, di))
    for i, (row, ei) in enumerate(zip(s.D, s.e)):
        lhs = Fraction(0)
        for c, v in zip(row, y):
            lhs += c * v
        _need(lhs <= ei, "real row %d violated: %s > %s" % (i + 1, lhs, ei))
    worst = None
    for i, r in enumerate(s.rows):
        lhs = Fraction(0)
        for a in range(s.m):
            for j in range(s.n):
                if r.A[a][j]:
                    lhs += x[a] * r.A[a][j] * y[j]
        for j in range(s.n):
            lhs += r.b[j] * y[j]
        mg = r.c - lhs
        _need(mg >= 0, "bilinear row %d violated by %s" % (i + 1, -mg))
        worst = mg if worst is None else min(worst, mg)
    return worst


def check_witness(s: MibSystem, x, y, eps=None, margin=None) -> list:
    try:
        x = [_i(v) for v in x]
        y = [_q(v) for v in y]
        worst = evaluate(s, x, y)
        if margin is not None and worst is not None:
            _need(_q(margin) == worst, "reported margin %s differs from actual %s" % (margin, worst))
    except Reject as exc:
        return [str(exc)]
    return []


# ---------------------------------------------------------------------------
# standard-form systems, rebuilt independently


def _standard(s: MibSystem):
    """(m, n, rows[(A, b, c)], D, e) of a system whose integer block is x >= 0."""
    return s.m, s.n, [(r.A, r.b, r.c) for r in s.rows], s.D, s.e


def _subst(sys_, w, P):
    m, n, rows, D, e = sys_
    k = len(P)
    _need(len(w) == m and all(len(c) == m for c in P), "substitution has the wrong shape")
    out = []
    for A, b, c in rows:
        A2 = tuple(tuple(sum(P[t][a] * A[a][j] for a in range(m)) for j in range(n)) for t in range(k))
        b2 = tuple(b[j] + sum(w[a] * A[a][j] for a in range(m)) for j in range(n))
        out.append((A2, b2, c))
    return (k, n, out, D, e)


def _key(sys_):
    m, n, rows, D, e = sys_
    return (m, n, tuple((tuple(map(tuple, A)), tuple(b), c) for A, b, c in rows), tuple(map(tuple, D)), tuple(e))


def _ybounds(sys_):
    m, n, rows, D, e = sys_
    out = []
    for j in range(n):
        pair = []
        for sign in (-1, 1):
            obj = [0] * n
            obj[j] = sign
            res = solve_lp([list(r) for r in D], list(e), obj)
            _need(isinstance(res, Feasible), "real block is empty or unbounded")
            pair.append(sign * res.value)
        out.append((pair[0], pair[1]))
    return out


class _Problem:
    """Rows are (lin {var: c}, quad {(i, j): c}, rhs) meaning <= rhs."""

    def __init__(self, bounds, rows):
        self.bounds = bounds
        self.rows = rows


def _bilinear(A, b, yoff, xoff, n):
    lin = {j: Fraction(c) for j, c in enumerate(b) if c}
    quad = {}
    for a, Ai in enumerate(A):
        for j, c in enumerate(Ai):
            if c:
                key = (yoff + j, xoff + a)
                quad[key] = quad.get(key, 0) + Fraction(c)
    return lin, {k: v for k, v in quad.items() if v}


def presolve_problem(sys_, eps) -> _Problem:
    m, n, rows, D, e = sys_
    bounds = _ybounds(sys_) + [(Fraction(0), None)] * m
    out = []
    for A, b, c in rows:
        lin, quad = _bilinear(A, b, 0, n, n)
        out.append((lin, quad, c - eps))
    for Drow, ei in zip(D, e):
        out.append(({j: Fraction(c) for j, c in enumerate(Drow) if c}, {}, Fraction(ei)))
    return _Problem(bounds, out)


def relaxed_problem(sys_, eps, dirs, omega_hat) -> _Problem:
    m, n, rows, D, e = sys_
    bounds = _ybounds(sys_) + [(Fraction(1), None)] * m
    out = []
    for A, b, c in rows:
        lin, quad = _bilinear(A, b, 0, n, n)
        out.append((lin, quad, c - Fraction(3, 4) * eps))
    for Drow, ei in zip(D, e):
        out.append(({j: Fraction(c) for j, c in enumerate(Drow) if c}, {}, Fraction(ei)))
    for u in dirs:
        poff = len(bounds)
        qoff = poff + m
        bounds += [(Fraction(0), None)] * (2 * m)
        for A, b, c in rows:
            for off in (poff, qoff):
                lin, quad = _bilinear(A, b, 0, off, n)
                out.append((lin, quad, Fraction(c)))
        # u.(p - q) >= omega_hat  as  -u.p + u.q <= -omega_hat
        lin = {}
        for a, c in enumerate(u):
            if c:
                lin[poff + a] = Fraction(-c)
                lin[qoff + a] = Fraction(c)
        out.append((lin, {}, -omega_hat))
    return _Problem(bounds, out)


# ---------------------------------------------------------------------------
# box certificates


_NEG, _POS = "-inf", "+inf"


def _ext_mul(x, y):
    """Product of extended endpoints; 0 times infinity is 0 here because
    the other factor is a finite endpoint of a nonempty box."""
    if isinstance(x, str) or isinstance(y, str):
        fin = y if isinstance(x, str) else x
        inf = x if isinstance(x, str) else y
        if isinstance(fin, str):
            return _POS if fin == inf else _NEG
        if fin == 0:
            return Fraction(0)
        return inf if fin > 0 else (_NEG if inf == _POS else _POS)
    return x * y


def _order(v):
    return (-1, 0) if v == _NEG else (1, 0) if v == _POS else (0, v)


def _product(a, b):
    """Interval (lo, hi) of x_i x_j for boxes a, b; None marks infinity."""
    al, ah = a[0], (_POS if a[1] is None else a[1])
    bl, bh = b[0], (_POS if b[1] is None else b[1])
    vals = [_ext_mul(x, y) for x in (al, ah) for y in (bl, bh)]
    lo, hi = min(vals, key=_order), max(vals, key=_order)
    return (None if isinstance(lo, str) else lo, None if isinstance(hi, str) else hi)


def _row_low(row, bounds):
    lin, quad, _ = row
    total = Fraction(0)
    for v, c in lin.items():
        lo, hi = bounds[v]
        end = lo if c > 0 else hi
        if end is None:
            return None
        total += c * end
    for (i, j), c in quad.items():
        if i == j:
            lo, hi = bounds[i]
            if lo >= 0:
                iv = (lo * lo, None if hi is None else hi * hi)
            elif hi is not None and hi <= 0:
                iv = (hi * hi, lo * lo)
            else:
                iv = (Fraction(0), None if hi is None else max(lo * lo, hi * hi))
        else:
            iv = _product(bounds[i], bounds[j])
        end = iv[0] if c > 0 else iv[1]
        if end is None:
            return None
        total += c * end
    return total


def _envelope(t, kind, bounds):
    """Sparse ({key: coef}, rhs) for the McCormick inequality ``kind`` of
    the product ``w_t = x_i x_j``; each is a product of two nonnegative
    affine factors expanded and rearranged to ``... <= rhs``."""
    i, j = t
    W = ("w", t)
    li, ui = bounds[i]
    lj, uj = bounds[j]
    if i == j:
        if kind in ("tl", "tu"):
            a = li if kind == "tl" else ui
            _need(a is not None, "tangent at an infinite bound")
            # (x - a)^2 >= 0  ->  2a x - w <= a^2
            return {("v", i): 2 * a, W: Fraction(-1)}, a * a
        if kind == "sec":
            _need(ui is not None, "secant over an unbounded range")
            # (x - l)(u - x) >= 0  ->  w - (l+u) x <= -l u
            return {W: Fraction(1), ("v", i): -(li + ui)}, -li * ui
        raise Reject("unknown square envelope %r" % (kind,))

    def prod(f, g):
        # f, g: (coef_i, coef_j, const) affine factors known to be >= 0;
        # f*g >= 0 expands to ci*dj... with x_i x_j -> w; requires the
        # product to be bilinear: f depends on x_i only, g on x_j only
        (fi, fc), (gj, gc) = f, g
        # (fi x_i + fc)(gj x_j + gc) = fi gj w + fi gc x_i + fc gj x_j + fc gc >= 0
        coef = {W: -fi * gj, ("v", i): -fi * gc, ("v", j): -fc * gj}
        return coef, fc * gc

    if kind == "ll":
        f, g = (Fraction(1), -li), (Fraction(1), -lj)
    elif kind == "uu":
        _need(ui is not None and uj is not None, "uu envelope needs finite upper bounds")
        f, g = (Fraction(-1), ui), (Fraction(-1), uj)
    elif kind == "lu":
        _need(uj is not None, "lu envelope needs a finite upper bound")
        f, g = (Fraction(1), -li), (Fraction(-1), uj)
    elif kind == "ul":
        _need(ui is not None, "ul envelope needs a finite upper bound")
        f, g = (Fraction(-1), ui), (Fraction(1), -lj)
    else:
        raise Reject("unknown envelope %r" % (kind,))
    return prod(f, g)


def _linear_row(prob: _Problem, bounds, desc):
    kind = desc[0]
    if kind == "lo":
        v = _i(desc[1])
        _need(0 <= v < len(bounds), "bound on unknown variable")
        return {("v", v): Fraction(-1)}, -bounds[v][0]
    if kind == "hi":
        v = _i(desc[1])
        _need(0 <= v < len(bounds) and bounds[v][1] is not None, "upper bound on an unbounded variable")
        return {("v", v): Fraction(1)}, bounds[v][1]
    if kind == "row":
        r = _i(desc[1])
        _need(0 <= r < len(prob.rows), "unknown row %d" % r)
        lin, quad, rhs = prob.rows[r]
        coef = {("v", v): c for v, c in lin.items()}
        for t, c in quad.items():
            coef[("w", t)] = coef.get(("w", t), 0) + c
        return coef, rhs
    if kind == "env":
        t = tuple(sorted(_i(a) for a in desc[1]))
        _need(any(t in row[1] for row in prob.rows), "envelope for a product that does not occur")
        return _envelope(t, desc[2], bounds)
    raise Reject("unknown row descriptor %r" % (kind,))


def _check_leaf(prob: _Problem, bounds, cert):
    kind = cert.get("kind")
    if kind == "interval":
        r = _i(cert["row"])
        _need(0 <= r < len(prob.rows), "interval certificate names unknown row")
        low = _row_low(prob.rows[r], bounds)
        _need(low is not None and low > prob.rows[r][2],
              "interval bound of row %d does not exceed its right-hand side" % r)
        return
    if kind == "farkas":
        total = {}
        rhs = Fraction(0)
        for desc, lam in cert["multipliers"]:
            lam = _q(lam)
            _need(lam >= 0, "negative Farkas multiplier")
            coef, r = _linear_row(prob, bounds, desc)
            for k, c in coef.items():
                total[k] = total.get(k, 0) + lam * c
            rhs += lam * r
        _need(not any(total.values()), "Farkas combination does not cancel the variables")
        _need(rhs < 0, "Farkas combination is not contradictory")
        return
    raise Reject("unknown leaf certificate %r" % (kind,))


def check_refutation(prob: _Problem, tree) -> None:
    """Raise Reject unless ``tree`` refutes ``prob`` over its whole box."""
    cover = {_i(v) for v in tree.get("cover", ())}
    for row in prob.rows:
        for i, j in row[1]:
            _need(i in cover or j in cover, "branch set misses a product term")
    for v in cover:
        _need(0 <= v < len(prob.bounds) and prob.bounds[v][1] is not None, "unbounded branch variable")
    stack = [(tree, list(prob.bounds))]
    while stack:
        node, bounds = stack.pop()
        if "cert" in node:
            _check_leaf(prob, bounds, node["cert"])
            continue
        v, at = _i(node["split"]), _q(node["at"])
        _need(v in cover, "split on a non-branch variable")
        lo, hi = bounds[v]
        _need(lo <= at <= hi, "split point outside the box")
        kids = node.get("children", [])
        _need(len(kids) == 2, "split node needs two children")
        left, right = list(bounds), list(bounds)
        left[v] = (lo, at)
        right[v] = (at, hi)
        stack.append((kids[0], left))
        stack.append((kids[1], right))


# ---------------------------------------------------------------------------
# certificate DAG


def _decompose_pieces(C, d):
    from .semilinear import decompose

    hls = decompose([list(r) for r in C], list(d))
    return {(tuple(p.base), tuple(tuple(c) for c in p.periods)) for p in hls.pieces}


def _pieces_of(records):
    return {(tuple(_i(a) for a in r["base"]), tuple(tuple(_i(a) for a in c) for c in r["periods"])) for r in records}


class _Checker:
    def __init__(self, cert):
        self.eps = _q(cert["eps"])
        _need(self.eps > 0, "certificate slack must be positive")
        self.nodes = cert["nodes"]
        self.done = set()

    def node(self, nid, sys_):
        nid = _i(nid)
        _need(0 <= nid < len(self.nodes), "dangling node reference %d" % nid)
        key = (nid, _key(sys_))
        if key in self.done:
            return
        node = self.nodes[nid]
        kind = node.get("kind")
        if kind == "base":
            self.base(node, sys_)
        elif kind == "presolve":
            check_refutation(presolve_problem(sys_, self.eps), node["refutation"])
        elif kind == "split":
            self.split(node, sys_)
        else:
            raise Reject("unknown node kind %r" % (kind,))
        self.done.add(key)

    def base(self, node, sys_):
        m, n, rows, D, e = sys_
        lam = [_q(v) for v in node["farkas"]]
        _need(len(lam) == len(rows) + len(D), "Farkas vector has the wrong length")
        _need(all(v >= 0 for v in lam), "negative Farkas multiplier")
        used = any(lam[:len(rows)])
        if used and m > 0:
            # x must not matter: either no products, or no row is used
            _need(all(not any(a for r in A for a in r) for A, _, _ in rows),
                  "base certificate on a node whose rows still depend on x")
        comb = [Fraction(0)] * n
        rhs = Fraction(0)
        for l, (A, b, c) in zip(lam, rows):
            for j in range(n):
                comb[j] += l * b[j]
            rhs += l * (c - self.eps)
        for l, Drow, ei in zip(lam[len(rows):], D, e):
            for j in range(n):
                comb[j] += l * Drow[j]
            rhs += l * ei
        _need(not any(comb) and rhs < 0, "base Farkas certificate does not refute the node")

    def split(self, node, sys_):
        m, n, rows, D, e = sys_
        _need(m > 0, "split node without integer variables")
        dirs = [tuple(_i(a) for a in u) for u in node["directions"]]
        _need(all(len(u) == m and any(u) for u in dirs), "malformed direction")
        omega_hat = _q(node["omega_hat"])
        _need(omega_hat > 0, "width threshold must be positive")
        # excess bound M >= max_y (b_i.y - c_i) via LP duals
        M = _q(node["excess"]["M"])
        _need(M >= 0, "excess bound must be nonnegative")
        recs = {_i(r["row"]): r for r in node["excess"]["rows"]}
        _need(set(recs) == set(range(len(rows))), "excess certificate must cover every row")
        for i, (A, b, c) in enumerate(rows):
            r = recs[i]
            mu = [_q(v) for v in r["duals"]]
            val = _q(r["value"])
            if n == 0:
                _need(val >= -c, "excess value below -c")
            else:
                _need(len(mu) == len(D) and all(v >= 0 for v in mu), "bad dual vector")
                for j in range(n):
                    _need(sum(mu[k] * D[k][j] for k in range(len(D))) == b[j], "duals do not reproduce b")
                _need(sum(mu[k] * e[k] for k in range(len(D))) - c <= val, "dual bound exceeds stated value")
            _need(val <= M, "excess value above M")
        kappa2 = _q(node["kappa2"])
        _need(kappa2 >= omega_hat * (1 + M / self.eps), "kappa2 is below omega_hat (1 + M / eps)")
        check_refutation(relaxed_problem(sys_, self.eps, dirs, omega_hat), node["refutation"])
        # branches
        seen = {}
        for ch in node["children"]:
            br = ch["branch"]
            if "zero" in br:
                tag = ("zero", _i(br["zero"]))
            else:
                tag = ("u", tuple(_i(a) for a in br["u"]), _i(br["b"]))
            _need(tag not in seen, "duplicate branch %r" % (tag,))
            seen[tag] = ch
        for i in range(m):
            ch = seen.get(("zero", i))
            _need(ch is not None, "missing branch x_%d = 0" % i)
            want = {((0,) * m, tuple(tuple(1 if a == j else 0 for a in range(m)) for j in range(m) if j != i))}
            _need(_pieces_of(ch["pieces"]) == want, "branch x_%d = 0 has wrong pieces" % i)
        for u in dirs:
            shift = sum(u)
            bmax = kappa2.numerator // kappa2.denominator
            for bval in range(-bmax, bmax + 1):
                ch = seen.get(("u", u, bval))
                if ch is None:
                    # only skippable when x >= 1 already forces u.x >= sum(u) > b
                    _need(all(a >= 0 for a in u) and bval < shift, "missing branch %r.x = %d" % (u, bval))
                    continue
                C = [list(u), [-a for a in u]] + [[-1 if a == j else 0 for a in range(m)] for j in range(m)]
                dd = [bval - shift, shift - bval] + [0] * m
                want = {(tuple(1 + a for a in w), P) for w, P in _decompose_pieces(C, dd)}
                _need(_pieces_of(ch["pieces"]) == want, "branch %r.x = %d has wrong pieces" % (u, bval))
        for ch in node["children"]:
            for rec in ch["pieces"]:
                w = [_i(a) for a in rec["base"]]
                P = [[_i(a) for a in c] for c in rec["periods"]]
                _need(len(P) < m, "child does not drop an integer variable")
                self.node(rec["node"], _subst(sys_, w, P))


def check_certificate(s: MibSystem, cert) -> list:
    """Verify an Unsat certificate against ``s``; returns problems."""
    try:
        chk = _Checker(cert)
        pieces = cert["pieces"]
        if s.integer_block_is_nonneg() or (s.m == 0 and not s.C):
            eye = tuple(tuple(1 if i == j else 0 for i in range(s.m)) for j in range(s.m))
            want = {((0,) * s.m, eye)}
            base = _standard(s)
        elif s.m == 0:
            want = set() if any(di < 0 for di in s.d) else {((), ())}
            base = _standard(s)
        else:
            want = _decompose_pieces(s.C, s.d)
            base = _standard(s)
        _need(_pieces_of(pieces) == want, "top-level pieces do not match the integer decomposition")
        for rec in pieces:
            w = [_i(a) for a in rec["base"]]
            P = [[_i(a) for a in c] for c in rec["periods"]]
            chk.node(rec["node"], _subst(base, w, P))
    except Reject as exc:
        return [str(exc)]
    except (KeyError, TypeError, IndexError) as exc:
        return ["malformed certificate: %r" % (exc,)]
    return []


# ---------------------------------------------------------------------------
# domination witnesses


def _replay(a, edges, delays):
    """Independent replay of a run: (value, final location) or Reject."""
    _need(len(edges) == len(delays), "one delay per edge is required")
    byname = {e.name: e for e in a.edges}
    rates = dict(zip(a.locations, a.rates))
    loc = a.initial
    clocks = dict.fromkeys(a.clocks, Fraction(0))
    total = [Fraction(0)] * len(a.observers)
    for name, dly in zip(edges, delays):
        dly = _q(dly)
        _need(dly >= 0, "negative delay")
        _need(name in byname, "unknown edge %r" % (name,))
        e = byname[name]
        _need(e.source == loc, "edge %s does not leave %s" % (name, loc))
        total = [t + dly * r for t, r in zip(total, rates[loc])]
        clocks = {c: v + dly for c, v in clocks.items()}
        for c, op, k in e.guard:
            _need(clocks[c] <= k if op == "<=" else clocks[c] >= k, "guard of %s fails" % name)
        for c in e.reset:
            clocks[c] = Fraction(0)
        loc = e.target
    return tuple(total), loc


def check_domination(a, gamma, witness) -> list:
    try:
        gamma = [_q(g) for g in gamma]
        d = len(a.observers)
        _need(len(gamma) == d, "gamma has the wrong dimension")
        lam = [_q(v) for v in witness["lambda"]]
        verts = [[_q(v) for v in g] for g in witness["vertices"]]
        _need(len(lam) == d + 1 and len(verts) == d + 1, "need d + 1 weights and vertices")
        _need(all(v >= 0 for v in lam) and sum(lam) == 1, "weights are not a convex combination")
        comb = [sum(lam[i] * verts[i][j] for i in range(d + 1)) for j in range(d)]
        _need(comb == [_q(v) for v in witness["value"]], "stated value is not the combination")
        _need(all(c <= g for c, g in zip(comb, gamma)), "combination does not lie below gamma")
        if "runs" in witness:
            paths = set()
            for r, g in zip(witness["runs"], verts):
                val, loc = _replay(a, r["edges"], r["delays"])
                _need(loc in a.accepting, "vertex run is not accepting")
                _need(list(val) == g, "vertex run does not produce its vertex")
                paths.add(tuple(r["edges"]))
            _need(len(paths) == 1, "vertex runs follow different edge sequences")
        if "run" in witness:
            val, loc = _replay(a, witness["run"]["edges"], witness["run"]["delays"])
            _need(loc in a.accepting, "combined run is not accepting")
            _need(list(val) == comb, "combined run does not produce the stated value")
    except Reject as exc:
        return [str(exc)]
    except (KeyError, TypeError, IndexError) as exc:
        return ["malformed witness: %r" % (exc,)]
    return []
