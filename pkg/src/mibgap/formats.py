"""JSON documents: instances, witnesses, pieces and reports.

Every number is written as a string: integers in decimal, rationals as
``"p/q"``.  JSON number literals are rejected on input so that nothing
passes through a float.  Output is canonical (sorted keys, two-space
indent, trailing newline), which makes parse -> serialize byte-stable.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .geometry import format_rational, parse_rational
from .system import Assignment, MibSystem


class FormatError(ValueError):
    """Malformed or schema-violating document."""


# ---------------------------------------------------------------------------
# scalars


def encode(obj):
    """Recursively turn ints/Fractions into strings and tuples into lists."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (int, Fraction)):
        return format_rational(obj)
    if isinstance(obj, str):
        return obj
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if hasattr(obj, "numerator") and hasattr(obj, "denominator"):
        return format_rational(obj)
    raise TypeError("cannot encode %r" % (obj,))


def dumps(doc) -> str:
    return json.dumps(encode(doc), sort_keys=True, indent=2) + "\n"


def _no_numbers(v):
    raise FormatError("numeric literal %r: write numbers as strings" % v)


def loads(text: str):
    try:
        return json.loads(text, parse_float=_no_numbers, parse_int=_no_numbers,
                          parse_constant=_no_numbers)
    except json.JSONDecodeError as exc:
        raise FormatError("invalid JSON: %s" % exc) from None


def load(path: str):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def rat(v, what="value") -> Fraction:
    if not isinstance(v, str):
        raise FormatError("%s must be a string, got %r" % (what, v))
    try:
        return parse_rational(v)
    except ValueError as exc:
        raise FormatError("%s: %s" % (what, exc)) from None


def integer(v, what="value") -> int:
    q = rat(v, what)
    if q.denominator != 1:
        raise FormatError("%s must be an integer, got %s" % (what, v))
    return q.numerator


def _vec(v, what, conv=integer):
    if not isinstance(v, list):
        raise FormatError("%s must be a list" % what)
    return [conv(a, what) for a in v]


def _mat(M, what, cols=None):
    if not isinstance(M, list):
        raise FormatError("%s must be a list of rows" % what)
    out = [_vec(r, what) for r in M]
    if cols is not None and any(len(r) != cols for r in out):
        raise FormatError("%s rows must have %d entries" % (what, cols))
    return out


def _require(doc, keys, what):
    if not isinstance(doc, dict):
        raise FormatError("%s must be an object" % what)
    missing = [k for k in keys if k not in doc]
    if missing:
        raise FormatError("%s is missing %s" % (what, ", ".join(missing)))


# ---------------------------------------------------------------------------
# MIB systems


def system_to_json(s: MibSystem) -> dict:
    return {
        "kind": "mib",
        "form": s.form,
        "m": s.m,
        "n": s.n,
        "rows": [{"A": [list(r) for r in row.A], "b": list(row.b), "c": row.c} for row in s.rows],
        "C": [list(r) for r in s.C],
        "d": list(s.d),
        "E": [list(r) for r in s.D],
        "f": list(s.e),
    }


def system_from_json(doc) -> MibSystem:
    _require(doc, ["kind", "m", "n", "rows"], "mib instance")
    if doc["kind"] != "mib":
        raise FormatError("expected kind 'mib', got %r" % doc["kind"])
    m = integer(doc["m"], "m")
    n = integer(doc["n"], "n")
    if m < 0 or n < 0:
        raise FormatError("dimensions must be nonnegative")
    rows = []
    if not isinstance(doc["rows"], list):
        raise FormatError("rows must be a list")
    for k, r in enumerate(doc["rows"]):
        _require(r, ["A", "c"], "row %d" % k)
        A = _mat(r["A"], "row %d A" % k, n)
        if len(A) != m:
            raise FormatError("row %d: A must have m = %d rows" % (k, m))
        b = _vec(r.get("b", ["0"] * n), "row %d b" % k)
        if len(b) != n:
            raise FormatError("row %d: b must have n = %d entries" % (k, n))
        rows.append((A, b, integer(r["c"], "row %d c" % k)))
    C = _mat(doc.get("C", []), "C", m)
    d = _vec(doc.get("d", []), "d")
    E = _mat(doc.get("E", []), "E", n)
    f = _vec(doc.get("f", []), "f")
    if len(C) != len(d) or len(E) != len(f):
        raise FormatError("C/d or E/f have inconsistent lengths")
    form = doc.get("form", "general")
    if form not in ("general", "standard"):
        raise FormatError("form must be 'general' or 'standard'")
    try:
        return MibSystem.build(m, n, rows, C, d, E, f, form)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def assignment_to_json(a: Assignment) -> dict:
    return {"x": list(a.x), "y": list(a.y)}


def assignment_from_json(doc) -> Assignment:
    _require(doc, ["x", "y"], "witness")
    return Assignment(tuple(_vec(doc["x"], "x")), tuple(_vec(doc["y"], "y", rat)))


# ---------------------------------------------------------------------------
# linear-set pieces for domination queries


def pieces_to_json(pieces, d: int, tag: str) -> dict:
    return {
        "kind": "pieces",
        "d": d,
        "tag": tag,
        "pieces": [{"base": list(p.base), "periods": [list(c) for c in p.periods]} for p in pieces],
    }


def pieces_from_json(doc):
    """Returns (pieces, d, tag) with pieces as semilinear.LinearSet."""
    from .semilinear import LinearSet

    _require(doc, ["kind", "d", "tag", "pieces"], "pieces file")
    if doc["kind"] != "pieces":
        raise FormatError("expected kind 'pieces'")
    d = integer(doc["d"], "d")
    tag = doc["tag"]
    if tag not in ("exact", "under-approximation"):
        raise FormatError("tag must be 'exact' or 'under-approximation'")
    out = []
    for k, p in enumerate(doc["pieces"]):
        _require(p, ["base"], "piece %d" % k)
        base = _vec(p["base"], "piece %d base" % k)
        if len(base) != (d + 1) * d:
            raise FormatError("piece %d: base must have (d+1)*d = %d entries" % (k, (d + 1) * d))
        periods = [tuple(_vec(c, "piece %d period" % k)) for c in p.get("periods", [])]
        if any(len(c) != len(base) for c in periods):
            raise FormatError("piece %d: period length mismatch" % k)
        out.append(LinearSet(tuple(base), tuple(periods)))
    return out, d, tag


# ---------------------------------------------------------------------------
# automata


def mpta_to_json(a) -> dict:
    rates = {}
    for loc, R in zip(a.locations, a.rates):
        nz = {o: r for o, r in zip(a.observers, R) if r}
        if nz:
            rates[loc] = nz
    return {
        "kind": "mpta",
        "locations": list(a.locations),
        "initial": a.initial,
        "accepting": list(a.accepting),
        "clocks": list(a.clocks),
        "observers": list(a.observers),
        "edges": [{"name": e.name, "source": e.source, "target": e.target,
                   "guard": [[c, op, k] for c, op, k in e.guard], "reset": list(e.reset)} for e in a.edges],
        "rates": rates,
    }


def mpta_from_json(doc):
    from .mpta import Mpta

    _require(doc, ["kind", "locations", "initial", "accepting", "clocks", "observers", "edges"], "mpta")
    if doc["kind"] != "mpta":
        raise FormatError("expected kind 'mpta', got %r" % doc["kind"])
    for key in ("locations", "accepting", "clocks", "observers", "edges"):
        if not isinstance(doc[key], list):
            raise FormatError("%s must be a list" % key)
    edges = []
    for k, e in enumerate(doc["edges"]):
        _require(e, ["name", "source", "target"], "edge %d" % k)
        guard = []
        for g in e.get("guard", []):
            if not (isinstance(g, list) and len(g) == 3):
                raise FormatError("edge %s: guard conjuncts are [clock, op, k]" % e["name"])
            guard.append((g[0], g[1], integer(g[2], "guard constant")))
        edges.append((e["name"], e["source"], e["target"], guard, list(e.get("reset", []))))
    rates = {}
    for loc, row in doc.get("rates", {}).items():
        if not isinstance(row, dict):
            raise FormatError("rates of %s must be an object" % loc)
        rates[loc] = {o: integer(v, "rate") for o, v in row.items()}
    try:
        return Mpta.build(doc["locations"], doc["initial"], doc["accepting"], doc["clocks"],
                          doc["observers"], edges, rates)
    except (ValueError, KeyError) as exc:
        raise FormatError(str(exc)) from None
