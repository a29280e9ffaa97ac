"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are
collected in the terminal summary.
"""

import random
import time
from fractions import Fraction as F
from pathlib import Path

import pytest

from conftest import ACCEPTANCE_LINES
from mibgap import formats
from mibgap.cli import main
from mibgap.engine import Budget, Engine, Sat, Unknown, Unsat
from mibgap.generators import random_system
from mibgap.mpta import odd_even, simulate
from mibgap.oracle import SatSlack, UnsatWithinBound, oracle
from mibgap.realfeas import Fail, KernelExhausted, PolyRow, RealProblem, Refuted, Witness, check_witness, decide, verify_refutation
from mibgap.relaxation import compute_constants
from mibgap.semilinear import decompose, window_check
from mibgap import verify

ROOT = Path(__file__).resolve().parents[1]
INST = ROOT / "instances"
GOLDEN = Path(__file__).parent / "golden"

EPS = F(1, 2)
SEEDS = range(200)


def report(n, ok, detail):
    line = "criterion %d: %s  %s" % (n, "PASS" if ok else "FAIL", detail)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, formats.loads(capsys.readouterr().out)


@pytest.fixture(scope="module")
def differential():
    """Solve the random suite once; later criteria reuse the outcomes."""
    rows = []
    for seed in SEEDS:
        s = random_system(seed)
        t0 = time.monotonic()
        v = Engine(EPS, Budget(ms=60000)).solve(s)
        rows.append((seed, s, v, oracle(s, EPS, 25), time.monotonic() - t0))
    return rows


@pytest.fixture(scope="module")
def witnesses():
    return []  # (instance doc, artifact doc) pairs for criterion 2


def test_criterion_1_gap_contract(differential, witnesses):
    bad, unknown, slowest = [], 0, 0.0
    for seed, s, v, o, dt in differential:
        slowest = max(slowest, dt)
        if isinstance(o, SatSlack) and isinstance(v, Unsat):
            bad.append((seed, "oracle has slack, solver says unsat"))
        if isinstance(o, UnsatWithinBound) and o.complete and isinstance(v, Sat):
            bad.append((seed, "oracle proved infeasible, solver says sat"))
        if isinstance(v, Unknown):
            unknown += 1
        if isinstance(v, Sat):
            witnesses.append((formats.system_to_json(s), dict(kind="witness", **formats.assignment_to_json(v.assignment))))
        if isinstance(v, Unsat):
            witnesses.append((formats.system_to_json(s), dict(kind="certificate", **v.certificate)))
    rate = unknown / len(differential)
    report(1, not bad and rate < 0.2 and len(differential) >= 200,
           "%d instances, %d violations, unknown rate %.1f%%, slowest %.2fs"
           % (len(differential), len(bad), 100 * rate, slowest))


def test_criterion_2_witness_integrity(capsys, tmp_path, witnesses):
    # the other suites contribute their Sat/Dominated outputs here too
    fig = INST / "odd_even_negated.json"
    dom = tmp_path / "dom.json"
    main(["dominate", str(fig), "--gamma=-3/4,-7/4", "--epsilon", "1/4", "--enumerate", "7,3", "-o", str(dom)])
    pairs = [(formats.load(fig), formats.load(dom))]
    sol = tmp_path / "r10.json"
    main(["solve", str(INST / "doubleexp_n2.json"), "--epsilon", "1/8", "-o", str(sol)])
    pairs.append((formats.load(INST / "doubleexp_n2.json"), formats.load(sol)))
    pairs.append((formats.load(INST / "doubleexp_n2.json"), formats.load(INST / "doubleexp_n2_witness.json")))
    pairs += witnesses
    failed, sats = [], 0
    for k, (inst, art) in enumerate(pairs):
        ip, ap = tmp_path / ("i%d.json" % k), tmp_path / ("a%d.json" % k)
        ip.write_text(formats.dumps(inst))
        ap.write_text(formats.dumps(art))
        code, out = cli(capsys, "check", ip, ap)
        if art.get("kind") != "certificate":
            sats += 1
        if code != 0:
            failed.append((k, out["problems"]))
    report(2, not failed and len(pairs) > 3,
           "%d Sat/Dominated outputs and %d Unsat certificates re-verified, %d rejected"
           % (sats, len(pairs) - sats, len(failed)))


def test_criterion_3_capture_property():
    nodes = checked = 0
    fails = []
    for seed in range(400):
        s = random_system(seed)
        eng = Engine(EPS, Budget(ms=60000, shortcuts=False))
        v = eng.solve(s)
        o = oracle(s, EPS, 25)
        if isinstance(o, SatSlack):
            assert not isinstance(v, Unsat), seed
        if isinstance(v, Unsat):
            assert verify.check_certificate(s, v.certificate) == [], seed
        if isinstance(v, Sat):
            assert verify.check_witness(s, v.assignment.x, v.assignment.y) == [], seed
        for node, U0, k2 in eng.stats.refutations:
            nodes += 1
            x = oracle(node, EPS, 25)
            if not isinstance(x, SatSlack):
                continue
            checked += 1
            x = x.x
            if not (any(v == 0 for v in x) or any(abs(sum(a * b for a, b in zip(u, x))) <= k2 for u in U0)):
                fails.append((seed, x))
    report(3, not fails and checked > 0,
           "%d refuted relaxed systems, %d with a slack solution, %d failures" % (nodes, checked, len(fails)))


def _random_linear_system(rng):
    m = rng.randint(1, 3)
    C, d = [], []
    for _ in range(rng.randint(1, 3)):
        row = [rng.randint(-3, 3) for _ in range(m)]
        rhs = rng.randint(-3, 3)
        if rng.random() < 0.5:
            C += [row, [-a for a in row]]
            d += [rhs, -rhs]
        else:
            C.append(row)
            d.append(rhs)
    for i in range(m):
        C.append([-1 if j == i else 0 for j in range(m)])
        d.append(0)
    return C, d


def test_criterion_4_semilinear():
    rng = random.Random(2024)
    total, bad = 300, []
    for k in range(total):
        C, d = _random_linear_system(rng)
        if not window_check(decompose(C, d), C, d, 12):
            bad.append(k)
    report(4, not bad, "%d randomized systems, window bound 12, %d mismatches" % (total, len(bad)))


def test_criterion_5_doubleexp(capsys):
    t0 = time.monotonic()
    code, rep = cli(capsys, "solve", INST / "doubleexp_n2.json", "--epsilon", "1/8", "--budget-ms", "120000")
    dt = time.monotonic() - t0
    x2 = int(rep["witness"]["x"][1]) if code == 0 else None
    gcode, _ = cli(capsys, "check", INST / "doubleexp_n2.json", INST / "doubleexp_n2_witness.json")
    # the same instance through the relaxed problem alone, no shell search
    s = formats.system_from_json(formats.load(INST / "doubleexp_n2.json"))
    t0 = time.monotonic()
    v = Engine(F(1, 8), Budget(ms=120000, shortcuts=False)).solve(s)
    dt2 = time.monotonic() - t0
    ok2 = isinstance(v, Sat) and v.assignment.x[1] >= 4 and not verify.check_witness(s, v.assignment.x, v.assignment.y)
    report(5, code == 0 and x2 >= 4 and dt < 120 and gcode == 0 and ok2 and dt2 < 120,
           "sat in %.2fs with x2 = %s (relaxation path: %.2fs, x2 = %s); golden witness check exit %d"
           % (dt, x2, dt2, v.assignment.x[1] if isinstance(v, Sat) else None, gcode))


def test_criterion_6_hilbert(capsys, tmp_path):
    add, mul = tmp_path / "add.json", tmp_path / "mul.json"
    assert main(["gen", "hilbert", "--eq", "x1 = x1 + x1", "-o", str(add)]) == 0
    assert main(["gen", "hilbert", "--eq", "x1 = x1 * x1", "-o", str(mul)]) == 0
    t0 = time.monotonic()
    c_add, _ = cli(capsys, "solve", add, "--budget-ms", "120000")
    t1 = time.monotonic()
    c_mul, r_mul = cli(capsys, "solve", mul, "--budget-ms", "120000")
    t2 = time.monotonic()
    report(6, c_add == 1 and t1 - t0 < 120 and c_mul != 1 and t2 - t1 < 130,
           "x1 = x1 + x1: exit %d in %.2fs; x1 = x1 * x1: %s in %.2fs"
           % (c_add, t1 - t0, r_mul["verdict"], t2 - t1))


def _fmt(v):
    return "(%s)" % ", ".join(str(c) for c in v)


def test_criterion_7_odd_even(capsys):
    a = odd_even()
    path = ["AB", "BC", "CB", "BC", "CB", "BC", "CD"]
    v1 = simulate(a, path, [1, 0, 1, 0, 1, 1, 0]).vector
    v2 = simulate(a, path, [F(2, 3), F(1, 3)] * 3 + [F(2, 3)]).vector
    t0 = time.monotonic()
    code, rep = cli(capsys, "dominate", INST / "odd_even_negated.json", "--gamma=-3/4,-7/4",
                    "--epsilon", "1/4", "--enumerate", "7,3")
    dt = time.monotonic() - t0
    report(7, v1 == (1, 2) and v2 == (1, 2) and code == 0 and dt < 60,
           "sample runs give %s and %s; dominate exit %d (%s) in %.2fs"
           % (_fmt(v1), _fmt(v2), code, rep["verdict"], dt))


def test_criterion_8_ledger():
    s = formats.system_from_json(formats.load(INST / "ledger_reference.json"))
    L = compute_constants(s, EPS)
    golden = formats.load(GOLDEN / "ledger_m1_H2.json")
    ok = (L.kappa1_upper == 4 and L.r == F(1, 32) and L.U_size == 23 and L.kappa2 == 42
          and L.kappa3 == 4 and formats.loads(formats.dumps(L.to_json())) == golden)
    report(8, ok, "kappa1=%s r=%s |U|=%s kappa2=%s kappa3=%s, golden file %s"
           % (L.kappa1_upper, L.r, L.U_size, L.kappa2, L.kappa3, "matches" if ok else "differs"))


def _verifier_problem(p):
    return verify._Problem(list(zip(p.lo, p.hi)), [(dict(r.lin), dict(r.quad), r.rhs) for r in p.rows])


def test_criterion_9_kernel():
    rows = (PolyRow.make((), [((0, 1), 1)], 1, sense=">="), PolyRow.make([(0, 1), (1, 1)], (), 1))
    p = RealProblem(("x", "y"), (F(0), F(0)), (F(10), F(10)), rows, F(1, 4))
    t0 = time.monotonic()
    res = decide(p)
    dt = time.monotonic() - t0
    ok = isinstance(res, Refuted) and verify_refutation(p, res)
    if ok:
        verify.check_refutation(_verifier_problem(p), res.tree)
    rng = random.Random(9)
    wit = bad = 0
    for _ in range(100):
        k = rng.randint(2, 3)
        rs = []
        for _ in range(rng.randint(1, 3)):
            lin = [(v, rng.randint(-2, 2)) for v in range(k)]
            quad = [((rng.randrange(k), rng.randrange(k)), rng.randint(-2, 2))]
            rs.append(PolyRow.make(lin, quad, rng.randint(-3, 3), rng.random() < 0.5))
        q = RealProblem(tuple("v%d" % i for i in range(k)), (F(0),) * k, (F(2),) * k, tuple(rs), F(1, 4))
        try:
            r = decide(q, max_boxes=2000)
        except KernelExhausted:
            continue
        if isinstance(r, Witness):
            wit += 1
            bad += isinstance(check_witness(q, r.point), Fail)
        else:
            bad += not verify_refutation(q, r)
    report(9, ok and dt < 10 and bad == 0,
           "AM-GM refuted in %.3fs (%d boxes) and re-verified; %d random witnesses, %d failures"
           % (dt, res.boxes if isinstance(res, Refuted) else -1, wit, bad))
