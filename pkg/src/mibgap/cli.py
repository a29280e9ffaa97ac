"""Command-line interface: ``mibgap solve|dominate|oracle|gen|check``.

Exit codes: 0 sat / dominated / check passed, 1 unsat / not dominated /
check failed, 2 unknown, 3 usage or parse error.  Reports are canonical
JSON on stdout.
"""

from __future__ import annotations

import argparse
import os
import sys
from collections import Counter
from fractions import Fraction

from . import formats
from .engine import Budget, Engine, Sat, Unknown, Unsat
from .formats import FormatError, dumps
from .geometry import parse_rational
from .system import UnboundedSystem

EXIT_YES, EXIT_NO, EXIT_UNKNOWN, EXIT_ERROR = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text: str) -> Fraction:
    q = _rational(text)
    if q <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return q


def _vector(text: str) -> list:
    try:
        return [parse_rational(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _threads(args) -> int:
    raw = args.threads if args.threads is not None else os.environ.get("MIBGAP_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise UsageError("threads must be a positive integer, got %r" % raw) from None
    if k < 1:
        raise UsageError("threads must be a positive integer")
    return k


def _budget(args) -> Budget:
    return Budget(ms=args.budget_ms if args.budget_ms > 0 else None, max_nodes=args.max_nodes)


def _emit(doc, out=None):
    text = dumps(doc)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    s = formats.system_from_json(formats.load(args.file))
    threads = _threads(args)
    report = {"kind": "report", "command": "solve", "eps": args.epsilon, "threads": threads}
    if args.explain:
        report["ledger"] = _ledger(s, args.epsilon)
    eng = Engine(args.epsilon, _budget(args))
    v = eng.solve(s)
    st = eng.stats
    report["stats"] = {"nodes": st.nodes, "lps": st.lps, "kernel_calls": st.kernel_calls,
                       "kernel_boxes": st.kernel_boxes, "splits": st.splits}
    if isinstance(v, Sat):
        report["verdict"] = "sat"
        report["witness"] = formats.assignment_to_json(v.assignment)
        report["margin"] = v.margin
        report["slack"] = v.margin >= args.epsilon
        code = EXIT_YES
    elif isinstance(v, Unsat):
        report["verdict"] = "unsat"
        cert = v.certificate
        report["summary"] = {
            "pieces": len(cert["pieces"]),
            "nodes": len(cert["nodes"]),
            "kinds": dict(sorted(Counter(n["kind"] for n in cert["nodes"]).items())),
        }
        if args.certificates:
            report["certificate"] = cert
        code = EXIT_NO
    else:
        report["verdict"] = "unknown"
        report["reason"] = v.reason
        code = EXIT_UNKNOWN
    _emit(report, args.out)
    return code


def _ledger(s, eps):
    from .relaxation import compute_constants

    if s.m < 1:
        return {"note": "no integer variables; the base case is a single LP"}
    led = compute_constants(s, eps)
    return led.to_json()


def cmd_oracle(args) -> int:
    from .oracle import SatNoSlack, SatSlack, oracle

    s = formats.system_from_json(formats.load(args.file))
    if args.xbound < 0:
        raise UsageError("xbound must be nonnegative")
    res = oracle(s, args.epsilon, args.xbound)
    report = {"kind": "report", "command": "oracle", "eps": args.epsilon, "xbound": args.xbound}
    if isinstance(res, SatSlack):
        report.update(verdict="sat-slack", witness={"x": list(res.x), "y": list(res.y)}, margin=res.margin)
        code = EXIT_YES
    elif isinstance(res, SatNoSlack):
        report.update(verdict="sat-no-slack", witness={"x": list(res.x), "y": list(res.y)}, margin=res.margin)
        code = EXIT_UNKNOWN
    else:
        report.update(verdict="unsat-within-bound", complete=res.complete)
        code = EXIT_NO
    _emit(report, args.out)
    return code


def cmd_gen(args) -> int:
    from . import generators

    try:
        if args.kind == "hilbert":
            s = generators.hilbert(_need_eqs(args))
        elif args.kind == "hilbert-unbounded":
            s = generators.hilbert_unbounded(_need_eqs(args))
        elif args.kind == "doubleexp":
            if args.n is None:
                raise UsageError("doubleexp needs --n")
            s = generators.doubleexp(args.n)
        else:
            if args.seed is None:
                raise UsageError("random needs --seed")
            s = generators.random_system(args.seed, args.m, args.dim_n, args.H, args.ell)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(formats.system_to_json(s), args.out)
    return EXIT_YES


def _need_eqs(args):
    if not args.eq:
        raise UsageError("give at least one --eq 'x_i = x_j + x_k' or 'x_i = x_j * x_k'")
    return args.eq


def cmd_check(args) -> int:
    from . import verify

    inst = formats.load(args.instance)
    art = formats.load(args.artifact)
    if not isinstance(art, dict):
        raise FormatError("artifact must be a JSON object")
    kind = art.get("kind")
    problems = []
    if inst.get("kind") == "mpta":
        a = formats.mpta_from_json(inst)
        if kind != "report" or art.get("command") != "dominate":
            raise FormatError("an mpta instance is checked against a dominate report")
        if art.get("verdict") != "dominated":
            problems = ["only dominated verdicts carry a checkable witness"]
        else:
            problems = verify.check_domination(a, art["gamma"], art["witness"])
    else:
        s = formats.system_from_json(inst)
        if kind == "witness":
            w = formats.assignment_from_json(art)
            problems = verify.check_witness(s, w.x, w.y)
        elif kind == "report" and art.get("command") in ("solve", "oracle"):
            verdict = art.get("verdict")
            if verdict in ("sat", "sat-slack", "sat-no-slack"):
                w = formats.assignment_from_json(art["witness"])
                problems = verify.check_witness(s, w.x, w.y, margin=art.get("margin"))
            elif verdict == "unsat" and "certificate" in art:
                problems = verify.check_certificate(s, art["certificate"])
            elif verdict == "unsat":
                problems = ["report carries no certificate (rerun solve with --certificates)"]
            else:
                problems = ["verdict %r carries nothing to check" % (verdict,)]
        elif kind == "certificate":
            problems = verify.check_certificate(s, art)
        else:
            raise FormatError("unsupported artifact kind %r" % (kind,))
    _emit({"kind": "check", "ok": not problems, "problems": problems})
    return EXIT_YES if not problems else EXIT_NO


def cmd_dominate(args) -> int:
    from . import mpta

    a = formats.mpta_from_json(formats.load(args.file))
    d = len(a.observers)
    if len(args.gamma) != d:
        raise UsageError("gamma has %d entries but the automaton has %d observers" % (len(args.gamma), d))
    if (args.pieces is None) == (args.enumerate is None):
        raise UsageError("give exactly one of --pieces FILE or --enumerate STEPS,TIME")
    _threads(args)
    if args.pieces is not None:
        pieces, pd, tag = formats.pieces_from_json(formats.load(args.pieces))
        if pd != d:
            raise UsageError("pieces file has d = %d, automaton has %d observers" % (pd, d))
        source = {"pieces": args.pieces, "tag": tag}
    else:
        try:
            steps, horizon = (int(t) for t in args.enumerate.split(","))
        except ValueError:
            raise UsageError("--enumerate expects STEPS,TIME") from None
        if steps < 0 or horizon < 0:
            raise UsageError("enumeration bounds must be nonnegative")
        runs = mpta.enumerate_runs(a, steps, horizon)
        pieces = mpta.pieces_from_runs(runs, d)
        tag = mpta.UNDER
        source = {"enumerate": {"steps": steps, "time": horizon, "runs": len(runs)}, "tag": tag}
    q = mpta.DominationQuery(tuple(args.gamma), args.epsilon, tuple(pieces), tag)
    v = mpta.gap_dominate(a, q, _budget(args))
    report = {"kind": "report", "command": "dominate", "gamma": args.gamma, "eps": args.epsilon,
              "source": source, "systems": len(pieces)}
    if isinstance(v, mpta.Dominated):
        w = dict(v.witness)
        w["vertices"] = [list(g) for g in w["vertices"]]
        w["value"] = list(w["value"])
        report.update(verdict="dominated", witness=w)
        code = EXIT_YES
    elif isinstance(v, mpta.NotDominated):
        report["verdict"] = "not-dominated"
        code = EXIT_NO
    else:
        report.update(verdict="unknown", reason=v.reason)
        code = EXIT_UNKNOWN
    _emit(report, args.out)
    return code


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mibgap", description="Gap satisfiability for bounded mixed-integer bilinear systems.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--budget-ms", type=int, default=60000, help="wall-clock budget, 0 for none")
        sp.add_argument("--max-nodes", type=int, default=20000)
        sp.add_argument("--threads", type=int, default=None, help="worker threads (env MIBGAP_THREADS)")
        sp.add_argument("-o", "--out", help="write the report here instead of stdout")

    sp = sub.add_parser("solve", help="decide a MIB instance")
    sp.add_argument("file")
    sp.add_argument("--epsilon", type=_positive, default=Fraction(1, 2))
    sp.add_argument("--explain", action="store_true", help="include the constant ledger")
    sp.add_argument("--certificates", action="store_true", help="embed the full refutation DAG")
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("dominate", help="gap domination for an MPTA")
    sp.add_argument("file")
    sp.add_argument("--gamma", type=_vector, required=True)
    sp.add_argument("--epsilon", type=_positive, default=Fraction(1, 4))
    sp.add_argument("--pieces")
    sp.add_argument("--enumerate", metavar="STEPS,TIME")
    common(sp)
    sp.set_defaults(func=cmd_dominate)

    sp = sub.add_parser("oracle", help="exhaustive bounded search")
    sp.add_argument("file")
    sp.add_argument("--epsilon", type=_positive, default=Fraction(1, 2))
    sp.add_argument("--xbound", type=int, default=25)
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("gen", help="generate an instance")
    sp.add_argument("kind", choices=["hilbert", "hilbert-unbounded", "doubleexp", "random"])
    sp.add_argument("--eq", action="append", help="equation x_i = x_j + x_k or x_i = x_j * x_k")
    sp.add_argument("--n", type=int, help="doubleexp size")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--dim-n", type=int, help="random: number of real variables")
    sp.add_argument("--H", type=int)
    sp.add_argument("--ell", type=int)
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("check", help="re-verify a witness, report or certificate")
    sp.add_argument("instance")
    sp.add_argument("artifact")
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("choose a command: solve, dominate, oracle, gen, check")
        return args.func(args)
    except (UsageError, FormatError, UnboundedSystem, OSError, ValueError) as exc:
        sys.stdout.write(dumps({"kind": "error", "type": type(exc).__name__, "message": str(exc)}))
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
