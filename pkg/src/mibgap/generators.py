"""Instance generators: Hilbert-equation gadgets, the doubly exponential
family and random bounded systems."""

from __future__ import annotations

import random
import re
from typing import Optional

from .system import MibSystem

_EQ = re.compile(r"^\s*x(\d+)\s*=\s*x(\d+)\s*([+*])\s*x(\d+)\s*$")


def parse_equations(eqs) -> list:
    """Parse strings such as ``"x1 = x2 + x3"`` or ``"x1 = x1*x1"``.

    Returns (op, i, j, k) tuples with op in {"+", "*"}; variables are
    numbered from 1.
    """
    out = []
    for e in eqs:
        if isinstance(e, (tuple, list)):
            out.append(tuple(e))
            continue
        m = _EQ.match(e.replace("·", "*"))
        if not m:
            raise ValueError("malformed equation %r (expected x_i = x_j + x_k or x_i = x_j * x_k)" % e)
        i, j, op, k = int(m.group(1)), int(m.group(2)), m.group(3), int(m.group(4))
        if min(i, j, k) < 1:
            raise ValueError("variables are numbered from 1 in %r" % e)
        out.append((op, i, j, k))
    return out


def _nvars(eqs) -> int:
    return max(max(i, j, k) for _, i, j, k in eqs)


def _zero(m, n):
    return [[0] * n for _ in range(m)]


def hilbert(eqs) -> MibSystem:
    """Bounded gadget: integer x_0..x_N >= 0, real y_1..y_N in [0, 1].

    x_0 = 1; x_i y_i = 1; sums carried over to the integer block; a
    product x_i = x_j x_k becomes (x_j + x_k) y_i = x_0 (y_j + y_k).
    Real variable y_i sits at index i - 1.
    """
    eqs = parse_equations(eqs)
    N = _nvars(eqs)
    m, n = N + 1, N
    rows = []

    def eq_rows(A):
        rows.append((A, None, 0))
        rows.append(([[-a for a in r] for r in A], None, 0))

    for i in range(1, N + 1):
        A = _zero(m, n)
        A[i][i - 1] = 1
        rows.append((A, None, 1))
        rows.append(([[-a for a in r] for r in A], None, -1))
    C, d = [], []
    for i in range(m):
        row = [0] * m
        row[i] = -1
        C.append(row)
        d.append(0)
    one = [0] * m
    one[0] = 1
    C += [one, [-a for a in one]]
    d += [1, -1]
    for op, i, j, k in eqs:
        if op == "+":
            row = [0] * m
            row[i] += 1
            row[j] -= 1
            row[k] -= 1
            C += [row, [-a for a in row]]
            d += [0, 0]
        else:
            A = _zero(m, n)
            A[j][i - 1] += 1
            A[k][i - 1] += 1
            A[0][j - 1] -= 1
            A[0][k - 1] -= 1
            eq_rows(A)
    D, e = [], []
    for j in range(n):
        r = [0] * n
        r[j] = 1
        D.append(r)
        e.append(1)
        D.append([-a for a in r])
        e.append(0)
    return MibSystem.build(m, n, rows, C, d, D, e)


def hilbert_unbounded(eqs) -> MibSystem:
    """Unbounded gadget over x_0..x_{N+1}, y_0..y_{N+1} (index = subscript).

    Rows are scaled by 2 where needed to keep integer constants.
    """
    eqs = parse_equations(eqs)
    N = _nvars(eqs)
    m = n = N + 2
    top = N + 1
    rows = []

    def absle(A, bound):
        rows.append((A, None, bound))
        rows.append(([[-a for a in r] for r in A], None, bound))

    for op, i, j, k in eqs:
        if op == "*":
            A = _zero(m, n)
            A[i][0] += 2
            A[j][k] -= 2
            absle(A, 1)
    for i in range(1, top + 1):
        A = _zero(m, n)
        A[i][0] += 1
        A[0][i] -= 1
        absle(A, 1)
        A = _zero(m, n)
        A[top][i] += 1
        A[i][top] -= 1
        absle(A, 1)
        # 4 (x0 + xi)(y0 + yi) + 1 <= x_top y0
        A = _zero(m, n)
        for a in (0, i):
            for b in (0, i):
                A[a][b] += 4
        A[top][0] -= 1
        rows.append((A, None, -1))
    C, d = [], []
    for i in range(m):
        row = [0] * m
        row[i] = -1
        C.append(row)
        d.append(0)
    one = [0] * m
    one[0] = 1
    C += [one, [-a for a in one]]
    d += [1, -1]
    for op, i, j, k in eqs:
        if op == "+":
            row = [0] * m
            row[i] += 1
            row[j] -= 1
            row[k] -= 1
            C += [row, [-a for a in row]]
            d += [0, 0]
    y0 = [0] * n
    y0[0] = 1
    D = [y0, [-a for a in y0]]
    e = [1, -1]
    return MibSystem.build(m, n, rows, C, d, D, e)


def doubleexp(nn: int) -> MibSystem:
    """x_i y_i <= 1, x_{i+1} y_i >= x_i y_0, x_1 = 2, y_0 = 1, 0 <= y <= 1.

    Integer x_1..x_n at indices 0..n-1; real y_0..y_n at indices 0..n.
    """
    if nn < 1:
        raise ValueError("doubleexp needs n >= 1")
    m, n = nn, nn + 1
    rows = []
    for i in range(1, nn + 1):
        A = _zero(m, n)
        A[i - 1][i] = 1
        rows.append((A, None, 1))
    for i in range(1, nn):
        A = _zero(m, n)
        A[i - 1][0] = 1
        A[i][i] = -1
        rows.append((A, None, 0))
    C, d = [], []
    for i in range(m):
        row = [0] * m
        row[i] = -1
        C.append(row)
        d.append(0)
    row = [0] * m
    row[0] = 1
    C += [row, [-a for a in row]]
    d += [2, -2]
    D, e = [], []
    for j in range(n):
        r = [0] * n
        r[j] = 1
        D += [r, [-a for a in r]]
        e += [1, -1 if j == 0 else 0]
    return MibSystem.build(m, n, rows, C, d, D, e)


def random_system(seed: int, m: Optional[int] = None, n: Optional[int] = None,
                  H: Optional[int] = None, ell: Optional[int] = None) -> MibSystem:
    """Random bounded system: entries in [-H, H], y in [0, 1]^n, x >= 0,
    and with probability 1/3 an extra integer row ``a^T x <= d``."""
    rng = random.Random(seed)
    m = m or rng.randint(1, 3)
    n = n or rng.randint(1, 3)
    H = H or rng.randint(1, 3)
    ell = ell or rng.randint(1, 3)
    rows = []
    for _ in range(ell):
        A = [[rng.randint(-H, H) for _ in range(n)] for _ in range(m)]
        b = [rng.randint(-H, H) for _ in range(n)]
        c = rng.randint(-H, H)
        rows.append((A, b, c))
    C, d = [], []
    for i in range(m):
        row = [0] * m
        row[i] = -1
        C.append(row)
        d.append(0)
    if rng.random() < 1 / 3:
        C.append([rng.randint(0, H) for _ in range(m)])
        d.append(rng.randint(0, H))
    D, e = [], []
    for j in range(n):
        r = [0] * n
        r[j] = 1
        D += [r, [-a for a in r]]
        e += [1, 0]
    return MibSystem.build(m, n, rows, C, d, D, e)
