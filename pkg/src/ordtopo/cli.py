"""Command-line surface over the ordinal, band, logic, and embedding modules.

Exit codes: 0 on success (or a verified countermodel), 1 when a
verification fails, 2 on errors and on "unknown" search results.  With
--json the output is a stable, golden-testable JSON record; the plain
text output is human-oriented.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .ordinal import (
    OMEGA,
    Ordinal,
    OrdinalError,
    OrdinalSyntaxError,
    add,
    big_l,
    e,
    e_iter,
    ell,
    ell_iter,
    left_subtract,
    multiply,
    omega_pow,
    ordinal_to_text,
    parse_ordinal,
    pounds,
)
from .topology import (
    TopologyError,
    bandset_to_text,
    derived_set,
    is_empty,
    member,
    min_witness,
    parse_bandset,
)
from .logic import (
    LogicError,
    PolySpace,
    condense,
    eval_kripke,
    eval_topo,
    formula_to_text,
    parse_formula,
)
from .jtree import FrameError, find_jtree_model, jframe_from_json, jframe_to_json
from .embed import (
    EmbedError,
    countermodel_from_json,
    countermodel_to_json,
    embed,
    verify_countermodel,
)


# --- the ordinal expression grammar --------------------------------------------------
#
#   sum  := prod ('+' prod)*
#   prod := atom ('*' atom)*
#   atom := func '(' sum (',' sum)* ')' | 'w' ('^' atom)? | nat | '(' sum ')'
#
# with func one of e, l, L, pounds, eiter, liter, sub.


class _ExprParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str):
        raise OrdinalSyntaxError(msg, self.pos)

    def peek(self) -> str:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1

    def ident(self) -> str:
        self.peek()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isalpha():
            self.pos += 1
        return self.text[start:self.pos]

    def nat(self) -> int:
        self.peek()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            self.error("expected a natural number")
        return int(self.text[start:self.pos])

    def args(self, n: int) -> List[Ordinal]:
        self.expect("(")
        out = [self.sum()]
        while self.peek() == ",":
            self.pos += 1
            out.append(self.sum())
        self.expect(")")
        if len(out) != n:
            self.error(f"expected {n} argument(s), got {len(out)}")
        return out

    def atom(self) -> Ordinal:
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            v = self.sum()
            self.expect(")")
            return v
        if ch.isdigit():
            return Ordinal.from_int(self.nat())
        if not ch.isalpha():
            self.error("expected a number, 'w', a function, or '('")
        name = self.ident()
        if name == "w":
            if self.peek() == "^":
                self.pos += 1
                return omega_pow(self.atom())
            return OMEGA
        if name == "e":
            return e(self.args(1)[0])
        if name == "l":
            return ell(self.args(1)[0])
        if name == "L":
            return big_l(self.args(1)[0])
        if name == "pounds":
            return pounds(self.args(1)[0])
        if name == "eiter":
            n, a = self.args(2)
            if not n.is_finite():
                self.error("eiter needs a finite iteration count")
            return e_iter(n.to_int(), a)
        if name == "liter":
            x, a = self.args(2)
            return ell_iter(x, a)
        if name == "sub":
            a, b = self.args(2)
            return left_subtract(a, b)
        self.error(f"unknown function {name!r}")

    def prod(self) -> Ordinal:
        v = self.atom()
        while self.peek() == "*":
            self.pos += 1
            v = multiply(v, self.atom())
        return v

    def sum(self) -> Ordinal:
        v = self.prod()
        while self.peek() == "+":
            self.pos += 1
            v = add(v, self.prod())
        return v

    def parse(self) -> Ordinal:
        v = self.sum()
        if self.peek():
            self.error("trailing input")
        return v


def _emit(args, record: dict, text: str) -> None:
    if args.json:
        print(json.dumps(record, sort_keys=True))
    else:
        print(text)


def _levels(text: str):
    return tuple(parse_ordinal(ch.strip()) for ch in text.split(","))


def _load_json(path: str):
    with open(path) as fh:
        return json.load(fh)


def _write_out(args, record: dict) -> None:
    blob = json.dumps(record, sort_keys=True, indent=2)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(blob + "\n")
    else:
        print(blob)


# --- subcommands ---------------------------------------------------------------------


def cmd_ord(args) -> int:
    value = _ExprParser(args.expr).parse()
    _emit(args, {"value": ordinal_to_text(value)}, ordinal_to_text(value))
    return 0


def cmd_band(args) -> int:
    s = parse_bandset(args.expr)
    if args.derive is not None:
        theta = parse_ordinal(args.theta) if args.theta else \
            max((b.hi for b in s.bands), default=OMEGA)
        s = derived_set(s, args.derive, theta)
    mw = min_witness(s)
    record = {"set": bandset_to_text(s), "empty": is_empty(s),
              "min": None if mw is None else ordinal_to_text(mw)}
    _emit(args, record, bandset_to_text(s))
    return 0


def cmd_eval(args) -> int:
    phi = parse_formula(args.formula)
    space = PolySpace(parse_ordinal(args.theta), _levels(args.levels))
    v = {}
    if args.val:
        v = {int(k): parse_bandset(s) for k, s in _load_json(args.val).items()}
    got = eval_topo(phi, space, v)
    record = {"set": bandset_to_text(got), "empty": is_empty(got),
              "theta_member": member(space.theta, got)}
    _emit(args, record, bandset_to_text(got))
    return 0


def cmd_kripke(args) -> int:
    phi = parse_formula(args.formula)
    obj = _load_json(args.frame)
    t = jframe_from_json(obj.get("frame", obj))
    v = {}
    if args.val:
        v = {int(k): frozenset(ns) for k, ns in _load_json(args.val).items()}
    got = eval_kripke(phi, t, v)
    nodes = sorted(got, key=repr)
    _emit(args, {"nodes": nodes}, " ".join(map(str, nodes)) or "(none)")
    return 0


def cmd_embed(args) -> int:
    obj = _load_json(args.tree)
    t = jframe_from_json(obj.get("frame", obj))
    sigma = tuple(int(ch) for ch in args.sigma.split(",")) if args.sigma else ()
    cm = embed(t, sigma)
    _write_out(args, countermodel_to_json(cm))
    return 0


def cmd_verify(args) -> int:
    cm = countermodel_from_json(_load_json(args.cm))
    phi = parse_formula(args.formula)
    rep = verify_countermodel(cm, phi, budget=args.budget, seed=args.seed)
    record = {"ok": rep.ok,
              "checks": [[name, mode, ok, detail]
                         for name, mode, ok, detail in rep.checks]}
    _emit(args, record, str(rep))
    return 0 if rep.ok else 1


def cmd_search(args) -> int:
    phi, idxs = condense(parse_formula(args.formula))
    if any(not i.is_finite() for i in idxs):
        print("error: transfinite modality indices are out of scope",
              file=sys.stderr)
        return 2
    sigma = [1 + i.to_int() for i in idxs]
    res = find_jtree_model(phi, args.max_nodes)
    if res is None:
        _emit(args, {"result": "unknown"}, "unknown")
        return 2
    record = {
        "result": "found",
        "frame": jframe_to_json(res.frame),
        "node": res.node,
        "valuation": {str(i): sorted(ns) for i, ns in res.valuation.items()},
        "sigma": sigma,
        "formula": formula_to_text(phi),
    }
    _write_out(args, record)
    return 0


# --- entry point ----------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--budget", type=int, default=4096)
    common.add_argument("--json", action="store_true")

    ap = argparse.ArgumentParser(prog="ordtopo", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("ord", parents=[common],
                       help="evaluate an ordinal expression")
    p.add_argument("expr")
    p.set_defaults(fn=cmd_ord)

    p = sub.add_parser("band", parents=[common],
                       help="normalize (and optionally derive) a band set")
    p.add_argument("expr")
    p.add_argument("--derive", type=int, default=None, metavar="LEVEL")
    p.add_argument("--theta", default=None)
    p.set_defaults(fn=cmd_band)

    p = sub.add_parser("eval", parents=[common],
                       help="evaluate a formula over an ordinal interval")
    p.add_argument("formula")
    p.add_argument("--theta", required=True)
    p.add_argument("--levels", required=True)
    p.add_argument("--val", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("kripke", parents=[common],
                       help="evaluate a formula on a finite frame")
    p.add_argument("formula")
    p.add_argument("--frame", required=True)
    p.add_argument("--val", default=None)
    p.set_defaults(fn=cmd_kripke)

    p = sub.add_parser("embed", parents=[common],
                       help="build a countermodel for a treelike frame")
    p.add_argument("--tree", required=True)
    p.add_argument("--sigma", default="")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("verify", parents=[common],
                       help="check a countermodel against a formula")
    p.add_argument("formula")
    p.add_argument("--cm", required=True)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("search", parents=[common],
                       help="bounded search for a treelike model")
    p.add_argument("formula")
    p.add_argument("--max-nodes", type=int, default=5)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_search)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OrdinalError, TopologyError, LogicError, FrameError, EmbedError,
            OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
