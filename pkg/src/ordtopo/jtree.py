"""Finite polymodal frames and their tree structure.

A frame is a finite node set with a list of transitive irreflexive
relations R_0..R_{n-1} subject to two monotonicity conditions:

  (I) for m < n: x R_n y implies R_m(x) = R_m(y);
  (J) for m < n: x R_m y and y R_n z imply x R_m z.

Such frames decompose into nested "planes" (components of the upper
relations); treelike frames are those whose planes nest as trees.  The
module also checks the map conditions (j1)-(j4) for maps from a band-set
space onto a treelike frame, and does bounded search for a treelike
model of a formula.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from .ordinal import Ordinal, ZERO
from . import topology
from .logic import Formula, Box, Dia, Not, And, Or, Implies, Var, eval_kripke, _indices
from .topology import derived_set, intersect, is_empty, is_open, sets_equal


class FrameError(Exception):
    pass


class InvalidFrame(FrameError):
    pass


class BudgetExceeded(FrameError):
    def __init__(self, report):
        super().__init__("check budget exhausted")
        self.report = report


# --- frames ---------------------------------------------------------------------


@dataclass(frozen=True)
class JFrame:
    nodes: Tuple
    rels: Tuple[FrozenSet[Tuple], ...]


def make_jframe(nodes, rels) -> JFrame:
    nodes = tuple(nodes)
    known = set(nodes)
    out = []
    for r in rels:
        r = frozenset((a, b) for a, b in r)
        for a, b in r:
            if a not in known or b not in known:
                raise InvalidFrame(f"edge ({a!r}, {b!r}) mentions an unknown node")
        out.append(r)
    return JFrame(nodes, tuple(out))


def jframe_from_json(obj) -> JFrame:
    try:
        nodes, rels = obj["nodes"], obj["rels"]
    except (KeyError, TypeError) as exc:
        raise InvalidFrame(f"frame object needs 'nodes' and 'rels': {exc!r}")
    return make_jframe(nodes, [[(a, b) for a, b in r] for r in rels])


def jframe_to_json(f: JFrame) -> dict:
    return {"nodes": list(f.nodes),
            "rels": [sorted(([a, b] for a, b in r), key=repr) for r in f.rels]}


def subframe(f: JFrame, keep) -> JFrame:
    keep = set(keep)
    return JFrame(tuple(n for n in f.nodes if n in keep),
                  tuple(frozenset(p for p in r if p[0] in keep and p[1] in keep)
                        for r in f.rels))


def _succ_table(rel) -> Dict:
    out: Dict = {}
    for a, b in rel:
        out.setdefault(a, set()).add(b)
    return {a: frozenset(s) for a, s in out.items()}


def generated_subframe(f: JFrame, x) -> JFrame:
    """Restriction of f to x and everything reachable from x."""
    succ = [_succ_table(r) for r in f.rels]
    keep, frontier = {x}, [x]
    while frontier:
        y = frontier.pop()
        for tab in succ:
            for z in tab.get(y, ()):
                if z not in keep:
                    keep.add(z)
                    frontier.append(z)
    return subframe(f, keep)


# --- validation -----------------------------------------------------------------


@dataclass
class FrameReport:
    violations: List[Tuple[str, tuple]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.ok:
            return "valid"
        lines = [f"{len(self.violations)} violation(s)"]
        for name, wit in self.violations[:8]:
            lines.append(f"  {name}: witness {wit}")
        return "\n".join(lines)


def validate_jframe(f: JFrame) -> FrameReport:
    rep = FrameReport()
    succ = [_succ_table(r) for r in f.rels]
    empty: FrozenSet = frozenset()
    for k, r in enumerate(f.rels):
        for a, b in r:
            if a == b:
                rep.violations.append((f"irreflexivity of R_{k}", (a,)))
            for c in succ[k].get(b, empty):
                if (a, c) not in r:
                    rep.violations.append((f"transitivity of R_{k}", (a, b, c)))
    for m in range(len(f.rels)):
        for n in range(m + 1, len(f.rels)):
            for x, y in f.rels[n]:
                sx, sy = succ[m].get(x, empty), succ[m].get(y, empty)
                if sx != sy:
                    z = next(iter(sx ^ sy))
                    rep.violations.append((f"(I) at m={m}, n={n}", (x, y, z)))
            for x, y in f.rels[m]:
                for z in succ[n].get(y, empty):
                    if (x, z) not in f.rels[m]:
                        rep.violations.append((f"(J) at m={m}, n={n}", (x, y, z)))
    return rep


# --- planes ---------------------------------------------------------------------


def _eq_classes(nodes, pairs) -> Tuple[FrozenSet, ...]:
    adj: Dict = {x: set() for x in nodes}
    for a, b in pairs:
        adj[a].add(b)
        adj[b].add(a)
    out, seen = [], set()
    for x in nodes:
        if x in seen:
            continue
        comp, stack = set(), [x]
        while stack:
            y = stack.pop()
            if y in comp:
                continue
            comp.add(y)
            stack.extend(adj[y])
        seen |= comp
        out.append(frozenset(comp))
    return tuple(out)


@dataclass(frozen=True)
class PlaneDecomposition:
    n: int
    blocks: Tuple[FrozenSet, ...]        # n-planes
    subblocks: Tuple[FrozenSet, ...]     # (n+1)-planes
    order: FrozenSet[Tuple[FrozenSet, FrozenSet]]  # alpha sees beta via R_n

    def block_of(self, x) -> FrozenSet:
        return next(s for s in self.blocks if x in s)

    def subblock_of(self, x) -> FrozenSet:
        return next(s for s in self.subblocks if x in s)


def planes(f: JFrame, n: int, check: bool = True) -> PlaneDecomposition:
    """n-planes and the order on the (n+1)-planes inside them."""
    if check:
        rep = validate_jframe(f)
        if not rep.ok:
            raise InvalidFrame(str(rep))
    hi = [p for r in f.rels[n:] for p in r]
    sub_hi = [p for r in f.rels[n + 1:] for p in r]
    blocks = _eq_classes(f.nodes, hi)
    subblocks = _eq_classes(f.nodes, sub_hi)
    rel = f.rels[n] if n < len(f.rels) else frozenset()
    loc = {x: s for s in subblocks for x in s}
    order = frozenset((loc[a], loc[b]) for a, b in rel)
    return PlaneDecomposition(n, blocks, subblocks, order)


def _is_tree(elems, order) -> bool:
    """elems under a transitive strict 'ancestor sees descendant' order."""
    elems = list(elems)
    for a in elems:
        if (a, a) in order:
            return False
    for a, b in order:
        for c, d in order:
            if b == c and (a, d) not in order:
                return False
    roots = [a for a in elems if not any((b, a) in order for b in elems)]
    if len(roots) != 1:
        return False
    for a in elems:
        preds = [b for b in elems if (b, a) in order]
        for b in preds:
            for c in preds:
                if b != c and (b, c) not in order and (c, b) not in order:
                    return False
    return True


def is_jtree(f: JFrame) -> bool:
    rep = validate_jframe(f)
    if not rep.ok:
        raise InvalidFrame(str(rep))
    for n in range(len(f.rels)):
        pd = planes(f, n, check=False)
        for block in pd.blocks:
            subs = {s for s in pd.subblocks if s <= block}
            order = {(a, b) for a, b in pd.order if a in subs and b in subs}
            if not _is_tree(subs, order):
                return False
            # uniformity: a plane sees every point of a plane it sees at all
            for a, b in order:
                if not all((x, y) in f.rels[n] for x in a for y in b):
                    return False
    return True


def hereditary_roots(f: JFrame, k: int) -> FrozenSet:
    """Nodes whose (j+1)-plane is the root plane of its j-plane for all j >= k.

    Heredity runs upward through the remaining levels: a hereditary
    (k+1)-root is the root of its own plane at level k and stays a root
    at every finer level.  (With k = 0 this singles out the global root
    of a connected treelike frame.)
    """
    if not is_jtree(f):
        raise InvalidFrame("hereditary roots need a treelike frame")
    decomps = [planes(f, j, check=False) for j in range(k, len(f.rels))]
    out = []
    for x in f.nodes:
        for pd in decomps:
            beta = pd.subblock_of(x)
            if any(b == beta for _, b in pd.order):
                break
        else:
            out.append(x)
    return frozenset(out)


def root_of(f: JFrame):
    """The unique node that is a hereditary root at every level."""
    if not f.rels:
        if len(f.nodes) != 1:
            raise InvalidFrame("a frame without relations must be a single node")
        return f.nodes[0]
    if len(planes(f, 0).blocks) != 1:
        raise InvalidFrame("frame is not connected")
    roots = hereditary_roots(f, 0)
    if len(roots) != 1:
        raise InvalidFrame(f"expected a unique root, found {len(roots)}")
    return next(iter(roots))


# --- bounded model search ----------------------------------------------------------


def _vars(phi: Formula, acc: set):
    if isinstance(phi, Var):
        acc.add(phi.index)
    elif isinstance(phi, (Box, Dia, Not)):
        _vars(phi.body, acc)
    elif isinstance(phi, (And, Or, Implies)):
        _vars(phi.left, acc)
        _vars(phi.right, acc)


def _partitions(items):
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in _partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1:]
        yield [[head]] + part


def _block_trees(b: int):
    """Parent arrays (parent of block i is parents[i-1] < i) for rooted trees."""
    if b == 1:
        yield []
        return
    for rest in _block_trees(b - 1):
        for p in range(b - 1):
            yield rest + [p]


def _jtree_rels(nodes, n_mods: int):
    """All relation tuples making the nodes a connected treelike frame.

    Recursive: a treelike frame on n relations is a rooted tree of blocks,
    each block a treelike frame on the remaining n-1 relations, with R_0
    running uniformly from ancestor blocks to descendant blocks.
    """
    if n_mods == 0:
        if len(nodes) == 1:
            yield ()
        return
    for part in _partitions(list(nodes)):
        blocks = sorted(sorted(p) for p in part)
        inner = [list(_jtree_rels(tuple(bl), n_mods - 1)) for bl in blocks]
        if any(not c for c in inner):
            continue
        for parents in _block_trees(len(blocks)):
            anc_of = {0: set()}
            for i, p in enumerate(parents, start=1):
                anc_of[i] = {p} | anc_of[p]
            r0 = frozenset((x, y)
                           for i, anc in anc_of.items()
                           for j in anc
                           for x in blocks[j] for y in blocks[i])
            for combo in itertools.product(*inner):
                rest = [set() for _ in range(n_mods - 1)]
                for rels in combo:
                    for k, r in enumerate(rels):
                        rest[k] |= r
                yield (r0,) + tuple(frozenset(r) for r in rest)


def _valuations(atoms, nodes):
    if not atoms:
        yield {}
        return
    if len(atoms) * len(nodes) <= 12:
        opts = [frozenset(c)
                for r in range(len(nodes) + 1)
                for c in itertools.combinations(nodes, r)]
    else:
        # tractable slice: empty, singleton, and full supports
        opts = [frozenset()] + [frozenset({x}) for x in nodes] + [frozenset(nodes)]
    for combo in itertools.product(opts, repeat=len(atoms)):
        yield dict(zip(atoms, combo))


@dataclass(frozen=True)
class SearchResult:
    frame: JFrame
    node: object
    valuation: Dict[int, FrozenSet]


def find_jtree_model(phi: Formula, max_nodes: int) -> Optional[SearchResult]:
    """Bounded search for a treelike model of phi.

    Returns a frame rooted at a node satisfying phi under the found
    valuation, or None (which means unknown, not unsatisfiable).  phi must
    use condensed modality indices 0..n-1.
    """
    mods: set = set()
    _indices(phi, mods)
    if any(not o.is_finite() for o in mods):
        raise FrameError("modality indices must be condensed naturals")
    n_mods = 1 + max((o.to_int() for o in mods), default=-1)
    atoms_acc: set = set()
    _vars(phi, atoms_acc)
    atoms = sorted(atoms_acc)
    for n in range(1, max_nodes + 1):
        nodes = tuple(range(n))
        for rels in _jtree_rels(nodes, n_mods):
            frame = JFrame(nodes, rels)
            for v in _valuations(atoms, nodes):
                got = eval_kripke(phi, frame, v)
                if not got:
                    continue
                w = min(got)
                sub = generated_subframe(frame, w)
                try:
                    treelike = is_jtree(sub)
                except InvalidFrame:
                    treelike = False
                if treelike:
                    kept = set(sub.nodes)
                    v_sub = {i: frozenset(s & kept) for i, s in v.items()}
                    return SearchResult(sub, w, v_sub)
                return SearchResult(frame, w, v)
    return None


# --- map condition checking ----------------------------------------------------------


def _frame_dia(f: JFrame, a, k: int) -> FrozenSet:
    return frozenset(x for x, y in f.rels[k] if y in a)


def _min_nbhd(f: JFrame, x, k: int) -> FrozenSet:
    """Least level-k open neighborhood: upward closure under R_k, R_{k+1}, ..."""
    out = {x}
    changed = True
    while changed:
        changed = False
        for r in f.rels[k:]:
            grow = {b for a, b in r if a in out and b not in out}
            if grow:
                out |= grow
                changed = True
    return frozenset(out)


def _sigma_open(f: JFrame, u, k: int) -> bool:
    u = set(u)
    return all(b in u for r in f.rels[k:] for a, b in r if a in u)


def frame_rank(f: JFrame, x, k: int) -> int:
    succ = _succ_table(f.rels[k])
    memo: Dict = {}

    def rho(y):
        if y not in memo:
            memo[y] = max((rho(z) + 1 for z in succ.get(y, ())), default=0)
        return memo[y]

    return rho(x)


@dataclass
class JMapReport:
    checks: List[Tuple[str, str, bool, str]] = field(default_factory=list)

    def add(self, name: str, mode: str, ok: bool, detail: str = ""):
        self.checks.append((name, mode, ok, detail))

    @property
    def ok(self) -> bool:
        return all(ok for _, _, ok, _ in self.checks)

    def __str__(self):
        lines = [("PASS" if self.ok else "FAIL") + f" ({len(self.checks)} checks)"]
        for name, mode, ok, detail in self.checks:
            tail = f" -- {detail}" if detail else ""
            lines.append(f"  [{mode}] {name}: {'ok' if ok else 'FAIL'}{tail}")
        return "\n".join(lines)


def jmap_check(fmap, space, t: JFrame, sigma=None, budget: int = 4096,
               seed: int = 0) -> JMapReport:
    """Check the map conditions (j1)-(j4) for fmap: [1, theta] -> t.

    fmap must provide apply(x: Ordinal) -> node and
    preimage(nodes) -> BandSet.  (j1) is the derived-set transfer law at
    the top level, checked on every subset of the nodes when 2^|T| fits
    the budget (EXACT) and on a random sample otherwise (SAMPLED); (j2)
    is image-openness spot-checked on generator bands (SAMPLED); (j3) and
    (j4) are exact band computations at the hereditary roots.
    """
    if not is_jtree(t):
        raise InvalidFrame("target is not a treelike frame")
    if sigma is not None and tuple(sigma) != tuple(space.levels):
        raise InvalidFrame("sigma disagrees with the space levels")
    nn = len(t.rels)
    if len(space.levels) < nn:
        raise InvalidFrame("space has fewer levels than the frame has relations")
    if budget < len(t.nodes) + 1:
        raise BudgetExceeded(JMapReport())
    theta = space.theta
    rep = JMapReport()
    nodes = tuple(t.nodes)

    if nn == 0:
        fib = fmap.preimage(nodes)
        lam = 1 if not space.levels else space.level_at(ZERO)
        ok = is_empty(derived_set(fib, lam, theta))
        rep.add("(j1) d-map law", "EXACT", ok, "" if ok else "domain not discrete")
        return rep

    lam_top = space.level_at(Ordinal.from_int(nn - 1))

    # (j1): f^{-1}(dA) = d f^{-1}(A) at the top level, over subsets A
    if 2 ** len(nodes) <= budget:
        mode = "EXACT"
        pool = [frozenset(c) for r in range(len(nodes) + 1)
                for c in itertools.combinations(nodes, r)]
    else:
        mode = "SAMPLED"
        rng = random.Random(seed)
        pool = [frozenset(x for x in nodes if rng.random() < 0.5)
                for _ in range(budget)]
    bad = None
    for a in pool:
        lhs = fmap.preimage(_frame_dia(t, a, nn - 1))
        rhs = derived_set(fmap.preimage(a), lam_top, theta)
        if not sets_equal(lhs, rhs, theta):
            bad = a
            break
    rep.add("(j1) d-map law", mode, bad is None,
            f"{len(pool)} subsets" if bad is None else f"A={sorted(map(repr, bad))}")

    # rank preservation spot check (a consequence of (j1), clearer diagnostics)
    from .logic import endpoint_pool
    from .topology import rank as point_rank

    bad_rank = None
    for x in endpoint_pool(theta):
        rho = point_rank(x, lam_top)
        want = frame_rank(t, fmap.apply(x), nn - 1)
        if not (rho.is_finite() and rho.to_int() == want):
            bad_rank = (x, want)
            break
    rep.add("(j1) rank preservation", "SAMPLED", bad_rank is None,
            "" if bad_rank is None else f"x={bad_rank[0]} maps to rank {bad_rank[1]}")

    # (j2): images of generator bands are open at every level
    from .ordinal import ONE, add
    from .topology import bandset, interval, make_band

    pts = endpoint_pool(theta)
    step = max(1, len(pts) // 6)

    def _gens(lam: int):
        out = [interval(ONE, theta)]
        for ks in range(lam):
            for i in range(0, len(pts), step):
                for j in range(i + 1, len(pts), step):
                    a_, b_ = pts[i], pts[j]
                    if ks == 0:
                        out.append(interval(add(a_, ONE), b_))
                    else:
                        out.append(bandset([make_band(ONE, theta, {ks: (a_, b_)})]))
        return out

    bad_open = None
    for k in range(nn):
        lam_k = space.level_at(Ordinal.from_int(k))
        for u in _gens(lam_k):
            img = frozenset(x for x in nodes
                            if not is_empty(intersect(fmap.preimage([x]), u)))
            if not _sigma_open(t, img, k):
                bad_open = (k, u)
                break
        if bad_open:
            break
    rep.add("(j2) openness", "SAMPLED", bad_open is None,
            "" if bad_open is None else
            f"level {bad_open[0]}, image of {topology.bandset_to_text(bad_open[1])}")

    # (j3)/(j4): hereditary-root conditions at each lower level
    for k in range(nn - 1):
        lam_k = space.level_at(Ordinal.from_int(k))
        for x in sorted(hereditary_roots(t, k), key=repr):
            below = frozenset(y for r in t.rels[k:] for a, y in r if a == x)
            ok3 = (is_open(fmap.preimage(below), lam_k, theta)
                   and is_open(fmap.preimage(below | {x}), lam_k, theta))
            rep.add(f"(j3) root {x!r} at level {k}", "EXACT", ok3)
            fib = fmap.preimage([x])
            ok4 = is_empty(intersect(derived_set(fib, lam_k, theta), fib))
            rep.add(f"(j4) fiber of {x!r} discrete at level {k}", "EXACT", ok4)
    return rep
