"""Multi-priced timed automata and the Gap Domination front-end.

A run is given by its edge sequence and one delay per edge: delay ``d_i``
elapses in the current location, then edge ``e_{i+1}`` fires.  The value
of a run is ``sum_i d_i R(l_i)``.

Domination queries are reduced to MIB systems: for a tuple of ``d + 1``
integer value vectors ``g_1, ..., g_{d+1}`` (drawn from a linear-set piece)
we look for real weights ``lam >= 0`` with ``sum lam = 1`` and
``sum lam_i g_i <= gamma``.  Periods of a piece become integer variables,
so the products ``lam_i * z_k`` are the bilinear terms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .engine import Budget, Sat, Unknown, Unsat, solve
from .geometry import as_rational
from .semilinear import LinearSet
from .system import MibSystem

EXACT = "exact"
UNDER = "under-approximation"


@dataclass(frozen=True)
class Edge:
    name: str
    source: str
    target: str
    guard: tuple = ()  # (clock, "<=" | ">=", k)
    reset: tuple = ()


@dataclass(frozen=True)
class Mpta:
    locations: tuple
    initial: str
    accepting: tuple
    clocks: tuple
    observers: tuple
    edges: tuple
    rates: tuple  # per location, in `locations` order; tuple over observers

    def __post_init__(self):
        locs = set(self.locations)
        if len(locs) != len(self.locations):
            raise ValueError("duplicate location names")
        if self.initial not in locs:
            raise ValueError("initial location %r does not exist" % self.initial)
        for l in self.accepting:
            if l not in locs:
                raise ValueError("accepting location %r does not exist" % l)
        names = set()
        for e in self.edges:
            if e.name in names:
                raise ValueError("duplicate edge name %r" % e.name)
            names.add(e.name)
            if e.source not in locs or e.target not in locs:
                raise ValueError("edge %s has an unknown endpoint" % e.name)
            for c, op, k in e.guard:
                if c not in self.clocks:
                    raise ValueError("edge %s guards unknown clock %r" % (e.name, c))
                if op not in ("<=", ">="):
                    raise ValueError("edge %s: guard operator must be <= or >=" % e.name)
                if not isinstance(k, int) or k < 0:
                    raise ValueError("edge %s: guard constants are naturals" % e.name)
            for c in e.reset:
                if c not in self.clocks:
                    raise ValueError("edge %s resets unknown clock %r" % (e.name, c))
        if len(self.rates) != len(self.locations):
            raise ValueError("one rate vector per location is required")
        for r in self.rates:
            if len(r) != len(self.observers) or any(not isinstance(v, int) for v in r):
                raise ValueError("rates must be integer vectors over the observers")

    @classmethod
    def build(cls, locations, initial, accepting, clocks, observers, edges, rates: dict):
        """``edges``: dicts or tuples (name, source, target, guard, reset);
        ``rates``: location -> {observer: int}, missing entries are 0."""
        es = []
        for e in edges:
            if isinstance(e, Edge):
                es.append(e)
                continue
            if isinstance(e, dict):
                e = (e["name"], e["source"], e["target"], e.get("guard", ()), e.get("reset", ()))
            name, src, tgt, guard, reset = e
            es.append(Edge(name, src, tgt, tuple((c, op, int(k)) for c, op, k in guard), tuple(reset)))
        for l in rates:
            if l not in locations:
                raise ValueError("rates given for unknown location %r" % l)
        R = []
        for l in locations:
            row = rates.get(l, {})
            for o in row:
                if o not in observers:
                    raise ValueError("rate for unknown observer %r" % o)
            R.append(tuple(int(row.get(o, 0)) for o in observers))
        return cls(tuple(locations), initial, tuple(accepting), tuple(clocks), tuple(observers),
                   tuple(es), tuple(R))

    def edge(self, ref) -> Edge:
        if isinstance(ref, int):
            if not 0 <= ref < len(self.edges):
                raise KeyError("no edge with index %d" % ref)
            return self.edges[ref]
        for e in self.edges:
            if e.name == ref:
                return e
        raise KeyError("no edge named %r" % (ref,))

    def rate(self, loc: str) -> tuple:
        return self.rates[self.locations.index(loc)]

    def out_edges(self, loc: str) -> list:
        return [e for e in self.edges if e.source == loc]


def odd_even() -> Mpta:
    """Three clocks x, y, z and observers o (odd) and e (even)."""
    return Mpta.build(
        ["A", "B", "C", "D"], "A", ["D"], ["x", "y", "z"], ["o", "e"],
        [
            ("AB", "A", "B", [], ["y", "z"]),
            ("BC", "B", "C", [("x", ">=", 1)], ["x"]),
            ("CB", "C", "B", [("y", "<=", 1)], ["y"]),
            ("CD", "C", "D", [("z", "<=", 3)], []),
        ],
        {"B": {"o": 1}, "C": {"e": 1}},
    )


# ---------------------------------------------------------------------------
# runs


@dataclass(frozen=True)
class Value:
    vector: tuple
    location: str
    accepting: bool


@dataclass(frozen=True)
class Rejected:
    step: int  # 0-based index of the offending edge
    reason: str


def _holds(guard, nu) -> bool:
    for c, op, k in guard:
        v = nu[c]
        if op == "<=" and v > k:
            return False
        if op == ">=" and v < k:
            return False
    return True


def simulate(a: Mpta, edges: Sequence, delays: Sequence):
    """Replay a run; ``delays[i]`` elapses before ``edges[i]`` fires."""
    if len(delays) != len(edges):
        raise ValueError("one delay per edge is required (%d edges, %d delays)" % (len(edges), len(delays)))
    es = [a.edge(e) for e in edges]
    ds = [as_rational(d) for d in delays]
    loc = a.initial
    nu = {c: Fraction(0) for c in a.clocks}
    val = [Fraction(0)] * len(a.observers)
    for i, (e, d) in enumerate(zip(es, ds)):
        if d < 0:
            return Rejected(i, "negative delay %s" % d)
        if e.source != loc:
            return Rejected(i, "edge %s leaves %s, but the run is in %s" % (e.name, e.source, loc))
        R = a.rate(loc)
        for k, r in enumerate(R):
            val[k] += d * r
        for c in nu:
            nu[c] += d
        if not _holds(e.guard, nu):
            bad = ", ".join("%s %s %d" % g for g in e.guard if not _holds((g,), nu))
            return Rejected(i, "guard %s of edge %s fails at %s" % (bad, e.name,
                                                                    {c: str(v) for c, v in nu.items()}))
        for c in e.reset:
            nu[c] = Fraction(0)
        loc = e.target
    return Value(tuple(val), loc, loc in a.accepting)


# ---------------------------------------------------------------------------
# observer splitting


@dataclass(frozen=True)
class Phi:
    """Linear map from split observer values back to the original ones."""

    observers: tuple  # original names
    split: tuple  # split names, (y+, y-) per original observer

    def __call__(self, vec) -> tuple:
        return tuple(vec[2 * k] - vec[2 * k + 1] for k in range(len(self.observers)))

    @property
    def matrix(self) -> list:
        d = len(self.observers)
        return [[(1 if j == 2 * k else -1 if j == 2 * k + 1 else 0) for j in range(2 * d)] for k in range(d)]


def split_observers(a: Mpta):
    """Automaton with nonnegative rates over ``y+``/``y-`` and the map Phi."""
    names = []
    for o in a.observers:
        names += [o + "+", o + "-"]
    rates = []
    for R in a.rates:
        row = []
        for r in R:
            row += [max(r, 0), max(-r, 0)]
        rates.append(tuple(row))
    b = Mpta(a.locations, a.initial, a.accepting, a.clocks, tuple(names), a.edges, tuple(rates))
    return b, Phi(a.observers, tuple(names))


# ---------------------------------------------------------------------------
# bounded integer-time enumeration


@dataclass(frozen=True)
class IntegerRun:
    edges: tuple  # edge names
    delays: tuple
    value: tuple


def enumerate_runs(a: Mpta, max_steps: int, max_time: int) -> list:
    """Accepting runs with at most ``max_steps`` edges and integer delays
    summing to at most ``max_time``; one representative per
    (edge sequence, value) pair."""
    if max_steps < 0 or max_time < 0:
        raise ValueError("bounds must be nonnegative")
    out = {}
    d = len(a.observers)
    # clocks beyond the largest guard constant behave alike; capping them
    # keeps the visited-state set small
    cap = max([k for e in a.edges for _, _, k in e.guard] + [0]) + 1

    def rec(loc, nu, t, path, delays, val):
        if path and loc in a.accepting:
            key = (path, val)
            if key not in out:
                out[key] = IntegerRun(path, delays, val)
        if len(path) == max_steps:
            return
        R = a.rate(loc)
        for dt in range(0, max_time - t + 1):
            nu2 = {c: v + dt for c, v in nu.items()}
            val2 = tuple(v + dt * r for v, r in zip(val, R))
            for e in a.out_edges(loc):
                if not _holds(e.guard, nu2):
                    continue
                nu3 = {c: (0 if c in e.reset else min(v, cap)) for c, v in nu2.items()}
                rec(e.target, nu3, t + dt, path + (e.name,), delays + (dt,), val2)

    rec(a.initial, {c: 0 for c in a.clocks}, 0, (), (), (0,) * d)
    return sorted(out.values(), key=lambda r: (len(r.edges), r.edges, r.value, r.delays))


def enumerate_integer_runs(a: Mpta, max_steps: int, max_time: int) -> set:
    """Value vectors of the accepting integer-time runs within the bounds."""
    return {r.value for r in enumerate_runs(a, max_steps, max_time)}


@dataclass(frozen=True)
class RunPiece:
    """A fixed tuple of integer runs sharing one edge sequence."""

    piece: LinearSet
    runs: tuple


def pieces_from_runs(runs, d: int) -> list:
    """Tuples of ``d + 1`` run values along a common edge sequence.

    Runs along one edge sequence form a convex family (guards are closed
    and resets fixed), so every convex combination of the tuple is the
    value of a genuine run.
    """
    groups = {}
    for r in runs:
        groups.setdefault(r.edges, {}).setdefault(r.value, r)
    seen = set()
    out = []
    for path in sorted(groups, key=lambda p: (len(p), p)):
        vals = sorted(groups[path])
        for combo in itertools.combinations_with_replacement(vals, d + 1):
            if combo in seen:
                continue
            seen.add(combo)
            base = tuple(v for g in combo for v in g)
            out.append(RunPiece(LinearSet(base, ()), tuple(groups[path][g] for g in combo)))
    return out


# ---------------------------------------------------------------------------
# master systems


@dataclass(frozen=True)
class MasterSystem:
    system: MibSystem
    scale: int  # rows are multiplied by this to clear denominators of gamma
    piece: LinearSet
    d: int


def assemble_master(pieces, gamma, d: int) -> list:
    """One MIB system per piece over integer period multipliers z and real
    weights lam_1..lam_{d+1}; observer j gives the bilinear row
    ``L * sum_i lam_i (w_ij + sum_k P_ijk z_k) <= L * gamma_j``."""
    gamma = [as_rational(g) for g in gamma]
    if len(gamma) != d:
        raise ValueError("gamma has %d entries, expected d = %d" % (len(gamma), d))
    L = 1
    for g in gamma:
        L = L * g.denominator // math.gcd(L, g.denominator)
    out = []
    n = d + 1
    for piece in pieces:
        if isinstance(piece, RunPiece):
            piece = piece.piece
        if piece.dim != n * d:
            raise ValueError("piece dimension %d, expected (d+1)*d = %d" % (piece.dim, n * d))
        m = len(piece.periods)
        rows = []
        for j in range(d):
            A = [[L * P[i * d + j] for i in range(n)] for P in piece.periods]
            b = [L * piece.base[i * d + j] for i in range(n)]
            rows.append((A, b, int(L * gamma[j])))
        D = [[-1 if i == k else 0 for i in range(n)] for k in range(n)]
        e = [0] * n
        D += [[1] * n, [-1] * n]
        e += [1, -1]
        out.append(MasterSystem(MibSystem.standard(m, n, rows, D, e), L, piece, d))
    return out


# ---------------------------------------------------------------------------
# gap domination


@dataclass(frozen=True)
class DominationQuery:
    gamma: tuple
    eps: Fraction
    pieces: tuple  # LinearSet or RunPiece
    tag: str = UNDER

    def __post_init__(self):
        if self.tag not in (EXACT, UNDER):
            raise ValueError("tag must be %r or %r" % (EXACT, UNDER))
        if as_rational(self.eps) <= 0:
            raise ValueError("eps must be positive")


@dataclass(frozen=True)
class Dominated:
    witness: dict


@dataclass(frozen=True)
class NotDominated:
    systems: int


def decode(master: MasterSystem, x, y) -> dict:
    """Vertices, weights and the combined value from a master assignment."""
    d, n = master.d, master.d + 1
    g = master.piece.point(x)
    verts = [tuple(g[i * d:(i + 1) * d]) for i in range(n)]
    lam = [as_rational(v) for v in y]
    comb = tuple(sum(lam[i] * verts[i][j] for i in range(n)) for j in range(d))
    return {"z": list(x), "lambda": lam, "vertices": verts, "value": comb}


def gap_dominate(a: Mpta, q: DominationQuery, budget: Optional[Budget] = None):
    d = len(a.observers)
    gamma = tuple(as_rational(g) for g in q.gamma)
    masters = assemble_master(q.pieces, gamma, d)
    unknown = None
    for idx, (master, piece) in enumerate(zip(masters, q.pieces)):
        v = solve(master.system, q.eps * master.scale, budget)
        if isinstance(v, Sat):
            w = decode(master, v.assignment.x, v.assignment.y)
            if any(c > g for c, g in zip(w["value"], gamma)) or sum(w["lambda"]) != 1 or min(w["lambda"]) < 0:
                raise AssertionError("master witness does not decode to a dominating combination")
            w["piece"] = idx
            w["margin"] = min((g - c for c, g in zip(w["value"], gamma)), default=Fraction(0))
            if isinstance(piece, RunPiece):
                w["runs"] = [{"edges": list(r.edges), "delays": list(r.delays), "value": list(r.value)}
                             for r in piece.runs]
                path = piece.runs[0].edges
                delays = [sum(l * r.delays[k] for l, r in zip(w["lambda"], piece.runs))
                          for k in range(len(path))]
                res = simulate(a, path, delays)
                if not isinstance(res, Value) or not res.accepting or res.vector != w["value"]:
                    raise AssertionError("combined run does not replay to the decoded value")
                w["run"] = {"edges": list(path), "delays": delays}
            return Dominated(w)
        if isinstance(v, Unknown):
            unknown = unknown or "piece %d: %s" % (idx, v.reason)
    if unknown is not None:
        return Unknown(unknown)
    if q.tag == EXACT:
        return NotDominated(len(masters))
    return Unknown("every master system is unsatisfiable, but the pieces under-approximate the reachable values")
