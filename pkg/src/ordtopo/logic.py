"""Polymodal provability-logic formulas and their two semantics.

Formulas carry ordinal-indexed modalities [xi] / <xi>.  They can be evaluated
topologically (diamonds as derived-set operators of successive band-set
topologies) or relationally (diamonds as preimages of frame relations).
condense() renumbers the finitely many modality indices of a formula to
0..n-1 so that they address positions in a level sequence or relation list.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from .ordinal import (
    ONE,
    OMEGA,
    Ordinal,
    ZERO,
    add,
    multiply,
    omega_pow,
    ordinal_to_text,
    parse_ordinal,
)
from . import topology
from .topology import BandSet, EMPTY, bandset, interval, make_band


class LogicError(Exception):
    pass


class UnboundVariable(LogicError):
    pass


class IndexOutOfRange(LogicError):
    pass


class FormulaSyntaxError(LogicError):
    def __init__(self, msg, pos):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


# --- AST ----------------------------------------------------------------------


@dataclass(frozen=True)
class Formula:
    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)

    def __str__(self):
        return formula_to_text(self)


@dataclass(frozen=True)
class Var(Formula):
    index: int


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bot(Formula):
    pass


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Box(Formula):
    index: Ordinal
    body: Formula


@dataclass(frozen=True)
class Dia(Formula):
    index: Ordinal
    body: Formula


TOP = Top()
BOT = Bot()


def conj(parts: List[Formula]) -> Formula:
    """Conjunction of a list; the empty conjunction is T."""
    if not parts:
        return TOP
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disj(parts: List[Formula]) -> Formula:
    if not parts:
        return BOT
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


# --- parsing / printing ---------------------------------------------------------
#
#   formula := or ('->' formula)?          (right associative)
#   or      := and ('|' and)*
#   and     := unary ('&' unary)*
#   unary   := '~' unary | '[' ord ']' unary | '<' ord '>' unary | atom
#   atom    := 'p'<digits> | 'T' | 'F' | '(' formula ')'


class _FParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg):
        raise FormulaSyntaxError(msg, self.pos)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def eat(self, s: str):
        self.skip()
        if not self.text.startswith(s, self.pos):
            self.error(f"expected {s!r}")
        self.pos += len(s)

    def formula(self) -> Formula:
        left = self.disjunct()
        self.skip()
        if self.text.startswith("->", self.pos):
            self.pos += 2
            return Implies(left, self.formula())
        return left

    def disjunct(self) -> Formula:
        out = self.conjunct()
        while self.peek() == "|":
            self.pos += 1
            out = Or(out, self.conjunct())
        return out

    def conjunct(self) -> Formula:
        out = self.unary()
        while self.peek() == "&":
            self.pos += 1
            out = And(out, self.unary())
        return out

    def _ordinal_until(self, close: str) -> Ordinal:
        end = self.text.find(close, self.pos)
        if end < 0:
            self.error(f"expected {close!r}")
        chunk = self.text[self.pos:end]
        try:
            o = parse_ordinal(chunk)
        except Exception as exc:
            self.error(f"bad ordinal index {chunk!r}: {exc}")
        self.pos = end + 1
        return o

    def unary(self) -> Formula:
        c = self.peek()
        if c == "~":
            self.pos += 1
            return Not(self.unary())
        if c == "[":
            self.pos += 1
            idx = self._ordinal_until("]")
            return Box(idx, self.unary())
        if c == "<":
            self.pos += 1
            idx = self._ordinal_until(">")
            return Dia(idx, self.unary())
        return self.atom()

    def atom(self) -> Formula:
        c = self.peek()
        if c == "(":
            self.pos += 1
            out = self.formula()
            self.eat(")")
            return out
        if c == "T":
            self.pos += 1
            return TOP
        if c == "F":
            self.pos += 1
            return BOT
        if c == "p":
            self.pos += 1
            start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isdigit():
                self.pos += 1
            if self.pos == start:
                self.error("expected variable digits after 'p'")
            return Var(int(self.text[start:self.pos]))
        self.error(f"unexpected {c!r}")


def parse_formula(text: str) -> Formula:
    p = _FParser(text)
    out = p.formula()
    p.skip()
    if p.pos != len(text):
        p.error("trailing input")
    return out


# precedence: -> (1) < | (2) < & (3) < unary/atoms (4)


def _print(phi: Formula, level: int) -> str:
    if isinstance(phi, Var):
        return f"p{phi.index}"
    if isinstance(phi, Top):
        return "T"
    if isinstance(phi, Bot):
        return "F"
    if isinstance(phi, Not):
        return "~" + _print(phi.body, 4)
    if isinstance(phi, Box):
        return f"[{ordinal_to_text(phi.index)}]" + _print(phi.body, 4)
    if isinstance(phi, Dia):
        return f"<{ordinal_to_text(phi.index)}>" + _print(phi.body, 4)
    if isinstance(phi, And):
        s = f"{_print(phi.left, 3)} & {_print(phi.right, 4)}"
        need = 3
    elif isinstance(phi, Or):
        s = f"{_print(phi.left, 2)} | {_print(phi.right, 3)}"
        need = 2
    elif isinstance(phi, Implies):
        s = f"{_print(phi.left, 2)} -> {_print(phi.right, 1)}"
        need = 1
    else:
        raise LogicError(f"unknown node {phi!r}")
    return f"({s})" if need < level else s


def formula_to_text(phi: Formula) -> str:
    return _print(phi, 1)


# --- condensation ---------------------------------------------------------------


def _indices(phi: Formula, acc: set):
    if isinstance(phi, (Box, Dia)):
        acc.add(phi.index)
        _indices(phi.body, acc)
    elif isinstance(phi, Not):
        _indices(phi.body, acc)
    elif isinstance(phi, (And, Or, Implies)):
        _indices(phi.left, acc)
        _indices(phi.right, acc)


def _remap(phi: Formula, table: Dict[Ordinal, Ordinal]) -> Formula:
    if isinstance(phi, Box):
        return Box(table[phi.index], _remap(phi.body, table))
    if isinstance(phi, Dia):
        return Dia(table[phi.index], _remap(phi.body, table))
    if isinstance(phi, Not):
        return Not(_remap(phi.body, table))
    if isinstance(phi, (And, Or, Implies)):
        return type(phi)(_remap(phi.left, table), _remap(phi.right, table))
    return phi


def condense(phi: Formula) -> Tuple[Formula, Tuple[Ordinal, ...]]:
    """Renumber modality indices to 0..n-1, returning the original sequence."""
    acc: set = set()
    _indices(phi, acc)
    sigma = tuple(sorted(acc))
    table = {lam: Ordinal.from_int(k) for k, lam in enumerate(sigma)}
    return _remap(phi, table), sigma


# --- topological semantics --------------------------------------------------------


@dataclass(frozen=True)
class PolySpace:
    theta: Ordinal
    levels: Tuple[Ordinal, ...]

    def __post_init__(self):
        for a, b in zip(self.levels, self.levels[1:]):
            if not a < b:
                raise ValueError("levels must be strictly increasing")

    def level_at(self, idx: Ordinal) -> int:
        if not idx.is_finite() or idx.to_int() >= len(self.levels):
            raise IndexOutOfRange(f"modality index {idx} (condense first?)")
        lam = self.levels[idx.to_int()]
        if not lam.is_finite():
            raise topology.UnsupportedLevel(f"level {lam}")
        return lam.to_int()


def eval_topo(phi: Formula, space: PolySpace, v: Dict[int, BandSet]) -> BandSet:
    theta = space.theta
    full = interval(ONE, theta)

    def go(f: Formula) -> BandSet:
        if isinstance(f, Var):
            if f.index not in v:
                raise UnboundVariable(f"p{f.index}")
            return v[f.index]
        if isinstance(f, Top):
            return full
        if isinstance(f, Bot):
            return EMPTY
        if isinstance(f, Not):
            return topology.complement_within(go(f.body), ONE, theta)
        if isinstance(f, And):
            return topology.intersect(go(f.left), go(f.right))
        if isinstance(f, Or):
            return topology.union(go(f.left), go(f.right))
        if isinstance(f, Implies):
            return topology.union(
                topology.complement_within(go(f.left), ONE, theta), go(f.right))
        if isinstance(f, Dia):
            return topology.derived_set(go(f.body), space.level_at(f.index), theta)
        if isinstance(f, Box):
            inner = topology.complement_within(go(f.body), ONE, theta)
            d = topology.derived_set(inner, space.level_at(f.index), theta)
            return topology.complement_within(d, ONE, theta)
        raise LogicError(f"unknown node {f!r}")

    return go(phi)


# --- Kripke semantics --------------------------------------------------------------


def eval_kripke(phi: Formula, frame, v: Dict[int, FrozenSet]) -> FrozenSet:
    """frame needs .nodes and .rels (sequence of sets of (a, b) pairs)."""
    nodes = frozenset(frame.nodes)

    def rel(idx: Ordinal):
        if not idx.is_finite() or idx.to_int() >= len(frame.rels):
            raise IndexOutOfRange(f"modality index {idx} (condense first?)")
        return frame.rels[idx.to_int()]

    def go(f: Formula) -> FrozenSet:
        if isinstance(f, Var):
            if f.index not in v:
                raise UnboundVariable(f"p{f.index}")
            return frozenset(v[f.index])
        if isinstance(f, Top):
            return nodes
        if isinstance(f, Bot):
            return frozenset()
        if isinstance(f, Not):
            return nodes - go(f.body)
        if isinstance(f, And):
            return go(f.left) & go(f.right)
        if isinstance(f, Or):
            return go(f.left) | go(f.right)
        if isinstance(f, Implies):
            return (nodes - go(f.left)) | go(f.right)
        if isinstance(f, Dia):
            body = go(f.body)
            return frozenset(a for a, b in rel(f.index) if b in body)
        if isinstance(f, Box):
            body = go(f.body)
            return frozenset(
                x for x in nodes
                if all(b in body for a, b in rel(f.index) if a == x))
        raise LogicError(f"unknown node {f!r}")

    return go(phi)


# --- axiom schema testing ------------------------------------------------------------


@dataclass
class AxiomReport:
    trials: int
    checked: int = 0
    failures: List[Tuple[str, str, Dict[int, str]]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def __str__(self):
        head = f"{self.checked} instances over {self.trials} valuations: "
        if self.ok:
            return head + "all valid"
        lines = [head + f"{len(self.failures)} failures"]
        for name, text, val in self.failures[:5]:
            lines.append(f"  {name}: {text} under {val}")
        return "\n".join(lines)


def endpoint_pool(theta: Ordinal) -> List[Ordinal]:
    """Stratified endpoints: successors and limits of each rank up to 3."""
    seeds = []
    for k in (ZERO, ONE, Ordinal.from_int(2), Ordinal.from_int(3), OMEGA):
        for c in (1, 2, 3):
            seeds.append(multiply(omega_pow(k), Ordinal.from_int(c)))
    pool = set()
    for a in seeds:
        for b in seeds + [ZERO]:
            for x in (a, add(a, b), add(a, ONE), add(add(a, b), ONE)):
                if ONE <= x <= theta:
                    pool.add(x)
    pool.add(theta)
    return sorted(pool)


def random_valuation(rng: random.Random, theta: Ordinal, n_vars: int = 2,
                     pool: Optional[List[Ordinal]] = None) -> Dict[int, BandSet]:
    pool = pool or endpoint_pool(theta)
    bounds = [None, ZERO, ONE, Ordinal.from_int(2), Ordinal.from_int(3), OMEGA]
    out = {}
    for i in range(n_vars):
        bands = []
        for _ in range(rng.randint(1, 2)):
            lo, hi = sorted(rng.sample(pool, 2))
            cons = {}
            for k in (1, 2):
                if rng.random() < 0.35:
                    cons[k] = (rng.choice(bounds), rng.choice(bounds))
            bands.append(make_band(lo, hi, cons))
        out[i] = bandset(bands)
    return out


def _random_formula(rng: random.Random, n_vars: int, n_mods: int, depth: int) -> Formula:
    if depth == 0 or rng.random() < 0.3:
        return rng.choice([Var(rng.randrange(n_vars)), TOP, BOT])
    kind = rng.randrange(5)
    if kind == 0:
        return Not(_random_formula(rng, n_vars, n_mods, depth - 1))
    if kind in (1, 2):
        op = rng.choice([And, Or, Implies])
        return op(_random_formula(rng, n_vars, n_mods, depth - 1),
                  _random_formula(rng, n_vars, n_mods, depth - 1))
    op = rng.choice([Box, Dia])
    return op(Ordinal.from_int(rng.randrange(n_mods)),
              _random_formula(rng, n_vars, n_mods, depth - 1))


def _schema_instances(n_mods: int, phi: Formula, psi: Formula):
    for k in range(n_mods):
        xi = Ordinal.from_int(k)
        yield ("(i) distribution",
               Implies(Box(xi, Implies(phi, psi)),
                       Implies(Box(xi, phi), Box(xi, psi))))
        yield ("(ii) Lob", Implies(Box(xi, Implies(Box(xi, phi), phi)), Box(xi, phi)))
        for j in range(k + 1, n_mods):
            zeta = Ordinal.from_int(j)
            yield ("(iii) monotonicity", Implies(Box(xi, phi), Box(zeta, phi)))
            yield ("(iv) stability",
                   Implies(Dia(xi, phi), Box(zeta, Dia(xi, phi))))


def check_axioms(space: PolySpace, trials: int = 200, seed: int = 0,
                 n_vars: int = 2) -> AxiomReport:
    """Validity of the four schemata under random band valuations."""
    rng = random.Random(seed)
    pool = endpoint_pool(space.theta)
    full = interval(ONE, space.theta)
    report = AxiomReport(trials=trials)
    n_mods = len(space.levels)
    for _ in range(trials):
        v = random_valuation(rng, space.theta, n_vars, pool)
        phi = _random_formula(rng, n_vars, n_mods, 1)
        psi = _random_formula(rng, n_vars, n_mods, 1)
        for name, inst in _schema_instances(n_mods, phi, psi):
            report.checked += 1
            if not topology.sets_equal(eval_topo(inst, space, v), full, space.theta):
                report.failures.append(
                    (name, formula_to_text(inst),
                     {i: topology.bandset_to_text(s) for i, s in v.items()}))
    return report


def find_falsifying_valuation(phi: Formula, space: PolySpace, trials: int = 200,
                              seed: int = 0, n_vars: int = 1):
    """Random search for a band valuation where phi is not valid."""
    rng = random.Random(seed)
    pool = endpoint_pool(space.theta)
    full = interval(ONE, space.theta)
    for _ in range(trials):
        v = random_valuation(rng, space.theta, n_vars, pool)
        if not topology.sets_equal(eval_topo(phi, space, v), full, space.theta):
            return v
    return None


# --- tree-characterizing formula and the Gamma fragment --------------------------------


def tree_formula(tree, root=None) -> Formula:
    """The single-modality formula satisfiable exactly at the root of `tree`.

    `tree` needs .nodes and .rels[0] as the strict (transitive) tree order;
    variable p_i stands for the i-th node.  Satisfied at the root by the
    valuation p_i -> {node_i}.
    """
    nodes = list(tree.nodes)
    lt = set(tree.rels[0]) if tree.rels else set()
    if root is None:
        non_roots = {b for _, b in lt}
        roots = [n for n in nodes if n not in non_roots]
        if len(roots) != 1 and len(nodes) > 1:
            raise LogicError("tree must have a unique root")
        root = roots[0] if roots else nodes[0]
    p = {n: Var(i) for i, n in enumerate(nodes)}
    z = ZERO

    def box(f):
        return Box(z, f)

    def dia(f):
        return Dia(z, f)

    parts = [p[root]]
    parts += [Not(p[s]) for s in nodes if s != root]
    parts += [dia(p[t]) for t in nodes if t != root]
    parts.append(box(disj([p[t] for t in nodes])))
    parts.append(box(Not(p[root])))
    parts += [box(Implies(p[s], Not(p[t])))
              for s in nodes for t in nodes if s != t]
    parts += [box(Implies(p[s], dia(p[t]))) for s, t in sorted(lt, key=str)
              if s in p and t in p]
    parts += [box(Implies(p[s], Not(dia(p[t]))))
              for s in nodes for t in nodes if (s, t) not in lt]
    parts += [box(Implies(p[t], box(disj([p[s] for s in nodes if (t, s) in lt]))))
              for t in nodes]
    return conj(parts)


def gamma_fragment(n: int) -> List[Formula]:
    """Dia p0 plus the first n clauses Box(p_i -> Dia p_{i+1})."""
    out: List[Formula] = [Dia(ZERO, Var(0))]
    for i in range(n):
        out.append(Box(ZERO, Implies(Var(i), Dia(ZERO, Var(i + 1)))))
    return out
