"""Constructive countermodels over ordinal intervals.

gl_embed builds the classical rank map from [1, w^h] onto a finite
single-relation tree (root at the top, children repeating cyclically
along blocks).  product assembles the two-projection cell structure
whose upper part carries a prescribed order type.  embed recurses over
a treelike polymodal frame and a modality sequence sigma and produces a
map expression f: [1, Theta] -> T with f(Theta) = root, a witness table
certifying surjectivity, and the fiber algebra (band preimages where
they exist).

Fibers of branching trees are genuinely periodic (every other block,
say) and fall outside the band algebra; preimage calls on such sets
raise NotRepresentable, and verify_countermodel falls back to a partial
check plus a pointwise sampled evaluation.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .ordinal import (
    DEPTH_CAP,
    OMEGA,
    ONE,
    ZERO,
    Ordinal,
    add,
    big_l,
    e,
    e_iter,
    ell_iter,
    left_subtract,
    multiply,
    normalize,
    omega_pow,
    ordinal_to_text,
    parse_ordinal,
)
from . import topology
from .topology import (
    EMPTY,
    BandSet,
    _geq_set,
    _merge_bound,
    bandset,
    bandset_to_text,
    complement_within,
    derived_set,
    intersect,
    interval,
    is_empty,
    is_open,
    make_band,
    member,
    parse_bandset,
    sets_equal,
    union,
)
from .logic import (
    And,
    Bot,
    Box,
    Dia,
    Implies,
    Not,
    Or,
    PolySpace,
    Top,
    UnboundVariable,
    Var,
    endpoint_pool,
    eval_kripke,
    eval_topo,
)
from .jtree import (
    InvalidFrame,
    JFrame,
    JMapReport,
    _frame_dia,
    _valuations,
    frame_rank,
    hereditary_roots,
    is_jtree,
    jframe_from_json,
    jframe_to_json,
    jmap_check,
    make_jframe,
    planes,
    root_of,
    subframe,
)


class EmbedError(Exception):
    pass


class EmptyTree(EmbedError):
    pass


class NotAJTree(EmbedError):
    pass


class UnsupportedSigma(EmbedError):
    pass


class NotRepresentable(EmbedError):
    """The requested preimage is not a finite union of bands."""


# --- ordinal helpers ---------------------------------------------------------------


def _nat(n: int) -> Ordinal:
    return Ordinal.from_int(n)


def _span(c: Ordinal) -> Ordinal:
    """-1 + c: the length of the half-open copy (0, c] shifted to start at 0."""
    return left_subtract(ONE, c)


def _ord_divmod(x: Ordinal, p: Ordinal) -> Tuple[int, Ordinal]:
    """(q, rem) with x = p*q + rem and rem < p; the quotient must be finite."""
    if p.is_zero():
        raise ValueError("division by zero")
    if x < p:
        return 0, x
    if p.is_finite():
        if not x.is_finite():
            raise EmbedError(f"{x} / {p}: infinite quotient")
        q, r = divmod(x.to_int(), p.to_int())
        return q, _nat(r)
    (lp, cp), (lx, cx) = p.terms[0], x.terms[0]
    if lx != lp:
        raise EmbedError(f"{x} / {p}: infinite quotient")
    lo, hi = 1, cx // cp + 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if multiply(p, _nat(mid)) <= x:
            lo = mid
        else:
            hi = mid - 1
    return lo, left_subtract(multiply(p, _nat(lo)), x)


def _split_at(x: Ordinal, xi: Ordinal) -> Tuple[Ordinal, Ordinal]:
    """x = w^xi * gamma + u with u < w^xi; returns (gamma, u)."""
    hi = tuple((left_subtract(xi, e_), c) for e_, c in x.terms if e_ >= xi)
    lo = tuple((e_, c) for e_, c in x.terms if e_ < xi)
    return Ordinal(hi), Ordinal(lo)


def _shift(s: BandSet, g: Ordinal) -> BandSet:
    """Left-translate a band set by g; l^k is invariant on positive offsets."""
    return bandset(
        make_band(add(g, b.lo), add(g, b.hi), b.cons_dict()) for b in s.bands
    )


# --- map expressions: ordinal-valued (preimage_set) ---------------------------------


class EllIter:
    """x -> l^delta(x) on [1, theta], floored to 1 when the orbit hits 0."""

    def __init__(self, delta: int, theta: Ordinal):
        self.delta = delta
        self.theta = theta

    def apply(self, x: Ordinal) -> Ordinal:
        v = ell_iter(_nat(self.delta), x)
        return ONE if v.is_zero() else v

    def preimage_set(self, s: BandSet) -> BandSet:
        if self.delta == 0:
            return intersect(s, interval(ONE, self.theta))
        d = self.delta
        out = EMPTY
        for b in s.bands:
            cons = {d + k: (c, dd) for k, c, dd in b.cons}
            cons[d] = _merge_bound(cons.get(d, (None, None)), (None, b.hi))
            part = bandset([make_band(ONE, self.theta, cons)])
            if not b.lo.is_zero():
                part = intersect(part, _geq_set(d, b.lo, self.theta))
            if b.member(ONE):
                # the floor: points whose l^delta collapses to 0 land on 1
                part = union(
                    part,
                    bandset([make_band(ONE, self.theta, {d: (None, ZERO)})]),
                )
            out = union(out, part)
        return out

    def to_json(self):
        return {"map": "liter", "delta": self.delta,
                "theta": ordinal_to_text(self.theta)}


class OtypUpMap:
    """w^xi * gamma -> gamma: the order type of the upper part below a point."""

    def __init__(self, xi: Ordinal, theta: Ordinal):
        self.xi = xi
        self.w = omega_pow(xi)
        self.theta = theta

    def apply(self, x: Ordinal) -> Ordinal:
        gamma, u = _split_at(x, self.xi)
        if not u.is_zero() or gamma.is_zero():
            raise ValueError(f"{x} is not in the upper part")
        return gamma

    def preimage_set(self, s: BandSet) -> BandSet:
        out = EMPTY
        for b in s.bands:
            lo, hi = multiply(self.w, b.lo), multiply(self.w, b.hi)
            if all(c is None for _, c, _ in b.cons):
                # successor gammas: exactly the points with l x = xi
                succ = intersect(
                    bandset([make_band(lo, hi, {1: (None, self.xi)})]),
                    _geq_set(1, self.xi, self.theta),
                )
                out = union(out, succ)
            # limit gammas: l x = xi + l gamma, deeper logarithms agree
            c1, d1 = next(((c, d) for k, c, d in b.cons if k == 1), (None, None))
            cons = {k: (c, d) for k, c, d in b.cons if k >= 2}
            cons[1] = (self.xi if c1 is None else add(self.xi, c1),
                       None if d1 is None else add(self.xi, d1))
            out = union(out, bandset([make_band(lo, hi, cons)]))
        return out

    def to_json(self):
        return {"map": "otyp_up", "xi": ordinal_to_text(self.xi),
                "theta": ordinal_to_text(self.theta)}


# --- the cell layout and projections -------------------------------------------------


class _Cells:
    """Consecutive cells tiling [1, w^xi): cell iota is a copy of
    [1, kappa_0] followed by a copy of [1, kappa_res(iota)]."""

    def __init__(self, kappas: Tuple[Ordinal, ...]):
        self.kappas = tuple(kappas)
        self.m = len(self.kappas)
        self.kappa0 = self.kappas[-1]
        self.span0 = _span(self.kappa0)
        marks = [ZERO]
        for k in self.kappas:
            marks.append(add(marks[-1], k))
        self.marks = tuple(marks)  # partial sums K_0 = 0, K_1, ..., K_m
        pre = [ZERO]
        for j in range(self.m):
            r = self.res(j)
            delta = add(add(add(self.span0, ONE), _span(self.kappas[r - 1])), ONE)
            pre.append(add(pre[-1], delta))
        self.prefix = tuple(pre)
        self.period = pre[-1]

    def res(self, iota: int) -> int:
        r = iota % self.m
        return self.m if r == 0 else r

    def alpha(self, iota: int) -> Ordinal:
        q, j = divmod(iota, self.m)
        return add(add(ONE, multiply(self.period, _nat(q))), self.prefix[j])

    def beta(self, iota: int) -> Ordinal:
        r = self.res(iota)
        return add(add(add(self.alpha(iota), self.span0), ONE),
                   _span(self.kappas[r - 1]))

    def locate(self, u: Ordinal) -> Tuple[int, Ordinal, Ordinal]:
        """Cell index and bounds for a base-block offset u in [1, w^xi)."""
        q, _ = _ord_divmod(u, self.period)
        if q and self.alpha(self.m * q) > u:
            q -= 1
        for j in range(self.m):
            iota = self.m * q + j
            a, b = self.alpha(iota), self.beta(iota)
            if a <= u <= b:
                return iota, a, b
        raise AssertionError(f"offset {u} escaped the cell layout")


class Pi0Map:
    """Collapse every cell of the lower part onto [1, kappa_1+...+kappa_m]."""

    def __init__(self, cells: _Cells, xi: Ordinal, theta: Ordinal,
                 x_down: BandSet):
        self.cells = cells
        self.xi = xi
        self.theta = theta
        self.x_down = x_down

    def apply(self, x: Ordinal) -> Ordinal:
        _, u = _split_at(x, self.xi)
        if u.is_zero():
            raise ValueError(f"{x} is not in the lower part")
        iota, a, _ = self.cells.locate(u)
        t = left_subtract(a, u)
        if t <= self.cells.span0:
            return add(ONE, t)
        s = left_subtract(add(self.cells.span0, ONE), t)
        r = self.cells.res(iota)
        return add(add(self.cells.marks[r - 1], ONE), s)

    def preimage_set(self, s: BandSet) -> BandSet:
        """Exact when s does not depend on the position inside [1, kappa]:
        the projection preserves every l^k pointwise, so position-free sets
        pull back to their own l-constraints over the lower part."""
        kappa = self.cells.marks[-1]
        widened = bandset(make_band(ONE, kappa, b.cons_dict()) for b in s.bands)
        if not sets_equal(s, widened, kappa):
            raise NotRepresentable(
                f"{bandset_to_text(s)} is position-dependent on [1,"
                f"{ordinal_to_text(kappa)}]")
        lifted = bandset(make_band(ONE, self.theta, b.cons_dict())
                         for b in s.bands)
        return intersect(self.x_down, lifted)

    def to_json(self):
        return {"map": "pi0",
                "kappas": [ordinal_to_text(k) for k in self.cells.kappas],
                "theta": ordinal_to_text(self.theta)}


@dataclass
class ProductStructure:
    xi: Ordinal
    theta: Ordinal
    lam: Ordinal
    w: Ordinal
    cells: _Cells
    markers: Tuple[Ordinal, ...]
    x_up: BandSet
    x_down: BandSet
    pi0: Pi0Map
    pi1: OtypUpMap
    s_set: BandSet

    def res(self, iota: int) -> int:
        return self.cells.res(iota)

    def cell(self, iota: int, gamma: Ordinal = ZERO) -> Tuple[Ordinal, Ordinal]:
        base = multiply(self.w, gamma)
        return add(base, self.cells.alpha(iota)), add(base, self.cells.beta(iota))


def product(kappas, lam: Ordinal) -> ProductStructure:
    kappas = tuple(kappas)
    if not kappas or any(k < ONE for k in kappas) or lam < ONE:
        raise EmbedError("product needs kappas and lambda >= 1")
    if any(b < a for a, b in zip(kappas, kappas[1:])):
        raise EmbedError("kappas must be sorted ascending")
    cells = _Cells(kappas)
    xi = add(big_l(kappas[-1]), ONE)
    w = omega_pow(xi)
    theta = multiply(w, lam)
    x_up = _geq_set(1, xi, theta)
    x_down = complement_within(x_up, ONE, theta)
    pi1 = OtypUpMap(xi, theta)
    pi0 = Pi0Map(cells, xi, theta, x_down)
    # isolated points of the upper part sitting over limit stages of [1, lam]
    d1 = derived_set(interval(ONE, lam), 1, lam)
    isolated = intersect(
        x_up, complement_within(derived_set(x_up, 1, theta), ONE, theta))
    s_set = intersect(isolated, pi1.preimage_set(d1))
    return ProductStructure(xi=xi, theta=theta, lam=lam, w=w, cells=cells,
                            markers=cells.marks[1:], x_up=x_up, x_down=x_down,
                            pi0=pi0, pi1=pi1, s_set=s_set)


def density_witness(prod: ProductStructure, i: int, u: Ordinal,
                    v: Ordinal) -> Ordinal:
    """A point x in (v, u) with pi0(x) = the i-th marker, witnessing that
    marker preimages accumulate at every point u of the upper part."""
    gamma, rem = _split_at(u, prod.xi)
    if not rem.is_zero() or gamma.is_zero():
        raise ValueError(f"{u} is not in the upper part")
    if not v < u:
        raise ValueError("empty neighborhood")
    vg, voff = _split_at(v, prod.xi)
    if gamma.is_successor():
        g = left_subtract(ONE, gamma)
    else:
        g = add(vg, ONE)  # gamma is a limit: some block strictly past v
    base = multiply(prod.w, g)
    off_lo = voff if g == vg else ZERO
    q_off = 0 if off_lo.is_zero() else _ord_divmod(off_lo, prod.cells.period)[0]
    j = i % prod.cells.m
    for q in (q_off, q_off + 1, q_off + 2):
        iota = prod.cells.m * q + j
        beta = prod.cells.beta(iota)
        if off_lo < beta:
            x = add(base, beta)
            assert v < x < u
            return x
    raise AssertionError("no cell top found past the offset")


# --- map expressions: node-valued (preimage) -----------------------------------------


class ConstMap:
    def __init__(self, node, theta: Ordinal):
        self.node = node
        self.theta = theta

    def apply(self, x: Ordinal):
        return self.node

    def preimage(self, nodes) -> BandSet:
        return interval(ONE, self.theta) if self.node in set(nodes) else EMPTY

    def to_json(self):
        return {"map": "const", "node": self.node,
                "theta": ordinal_to_text(self.theta)}


class ComposeMap:
    """node_map after ord_map."""

    def __init__(self, node_map, ord_map):
        self.node_map = node_map
        self.ord_map = ord_map
        self.theta = ord_map.theta

    def apply(self, x: Ordinal):
        return self.node_map.apply(self.ord_map.apply(x))

    def preimage(self, nodes) -> BandSet:
        return self.ord_map.preimage_set(self.node_map.preimage(nodes))

    def to_json(self):
        return {"map": "compose", "outer": self.node_map.to_json(),
                "inner": self.ord_map.to_json()}


class GLEmbedMap:
    """The rank map onto a rooted single-relation tree.

    The root sits at theta = w^h (h the tree height); below it the
    children repeat cyclically along consecutive blocks, child i getting
    blocks of length w^{h_i}.  Fibers of whole rank classes are the rank
    bands {x: l x = rho}; anything finer mixes positions of equal rank
    and is not a band set.
    """

    def __init__(self, root, children: List["GLEmbedMap"]):
        self.root = root
        self.children = list(children)
        self.height = 1 + max((c.height for c in self.children), default=-1)
        self.theta = omega_pow(_nat(self.height))
        pre = [ZERO]
        for c in self.children:
            pre.append(add(pre[-1], c.theta))
        self.prefix = tuple(pre)
        self.period = pre[-1]
        self.node_rank: Dict = {root: self.height}
        for c in self.children:
            self.node_rank.update(c.node_rank)

    def apply(self, x: Ordinal):
        if not ONE <= x <= self.theta:
            raise ValueError(f"{x} outside [1, {self.theta}]")
        if x == self.theta:
            return self.root
        _, rem = _ord_divmod(x, self.period)
        if rem.is_zero():
            last = self.children[-1]
            return last.apply(last.theta)
        for i, c in enumerate(self.children):
            if rem <= self.prefix[i + 1]:
                return c.apply(left_subtract(self.prefix[i], rem))
        raise AssertionError(f"{x} escaped the block layout")

    def preimage(self, nodes) -> BandSet:
        want = set(nodes) & set(self.node_rank)
        if not want:
            return EMPTY
        ranks = {self.node_rank[v] for v in want}
        spill = sorted(
            (v for v, r in self.node_rank.items() if r in ranks and v not in want),
            key=repr)
        if spill:
            raise NotRepresentable(
                f"fiber of {sorted(map(repr, want))} splits the rank class "
                f"of {spill[0]!r}")
        out = []
        for rho in sorted(ranks):
            cons = {1: (None, ZERO)} if rho == 0 else {1: (_nat(rho - 1), _nat(rho))}
            out.append(make_band(ONE, self.theta, cons))
        return bandset(out)

    def witnesses(self) -> Dict:
        out = {self.root: self.theta}
        for i, c in enumerate(self.children):
            for v, w in c.witnesses().items():
                out[v] = add(self.prefix[i], w)
        return out

    def to_json(self):
        return {"map": "rank", "root": self.root,
                "children": [c.to_json() for c in self.children]}


class SegmentSum:
    """Maps glued side by side: segment i covers (K_{i-1}, K_i]."""

    def __init__(self, parts):
        # parts: list of (k_prev, k_hi, fmap, own node frozenset)
        self.parts = list(parts)
        self.theta = self.parts[-1][1]

    def apply(self, y: Ordinal):
        for k_prev, k_hi, fm, _ in self.parts:
            if y <= k_hi:
                return fm.apply(left_subtract(k_prev, y))
        raise ValueError(f"{y} outside [1, {self.theta}]")

    def preimage(self, nodes) -> BandSet:
        nodes = set(nodes)
        out = EMPTY
        for k_prev, _, fm, own in self.parts:
            hit = nodes & own
            if hit:
                out = union(out, _shift(fm.preimage(hit), k_prev))
        return out

    def to_json(self):
        return {"map": "segments",
                "parts": [{"nodes": sorted(own, key=repr), "fmap": fm.to_json()}
                          for _, _, fm, own in self.parts]}


class CaseIIMap:
    """Dispatch between the cell projection (lower part, onto the child
    subtrees) and the order-type projection (upper part, onto the root's
    own plane)."""

    def __init__(self, prod: ProductStructure, fstar: SegmentSum, f0,
                 alpha_nodes):
        self.prod = prod
        self.fstar = fstar
        self.f0 = f0
        self.alpha_nodes = frozenset(alpha_nodes)
        self.theta = prod.theta

    def apply(self, x: Ordinal):
        _, u = _split_at(x, self.prod.xi)
        if u.is_zero():
            return self.f0.apply(self.prod.pi1.apply(x))
        return self.fstar.apply(self.prod.pi0.apply(x))

    def preimage(self, nodes) -> BandSet:
        nodes = set(nodes)
        out = self.prod.pi1.preimage_set(
            self.f0.preimage(nodes & self.alpha_nodes))
        down = nodes - self.alpha_nodes
        if down:
            out = union(out, self.prod.pi0.preimage_set(self.fstar.preimage(down)))
        return out

    def to_json(self):
        return {"map": "product",
                "kappas": [ordinal_to_text(k) for k in self.prod.cells.kappas],
                "lam": ordinal_to_text(self.prod.lam),
                "alpha": sorted(self.alpha_nodes, key=repr),
                "f0": self.f0.to_json(), "fstar": self.fstar.to_json()}


# --- the base embedding ---------------------------------------------------------------


def gl_embed(t) -> Tuple[Ordinal, GLEmbedMap]:
    """Rank map for a finite rooted tree under a single relation."""
    if not t.nodes:
        raise EmptyTree("cannot embed an empty tree")
    if len(t.rels) != 1:
        raise NotAJTree(f"expected one relation, got {len(t.rels)}")
    rel = t.rels[0]

    def build(x) -> GLEmbedMap:
        succ = frozenset(y for a, y in rel if a == x)
        imm = sorted((y for y in succ
                      if not any((z, y) in rel for z in succ if z != y)),
                     key=repr)
        return GLEmbedMap(x, [build(c) for c in imm])

    fm = build(root_of(t))
    return fm.theta, fm


# --- the recursive embedding ------------------------------------------------------------


def _embed(t: JFrame, sigma: Tuple[int, ...]):
    """Returns (theta, fmap, witnesses)."""
    nodes = tuple(t.nodes)
    if len(nodes) == 1:
        return ONE, ConstMap(nodes[0], ONE), {nodes[0]: ONE}
    if sigma[0] > 1:
        delta = sigma[0] - 1
        th, fm, wit = _embed(t, tuple(s - delta for s in sigma))
        theta = e_iter(delta, th)
        return (theta, ComposeMap(fm, EllIter(delta, theta)),
                {v: e_iter(delta, w) for v, w in wit.items()})
    if len(t.rels) == 1:
        _, fm = gl_embed(t)
        return fm.theta, fm, fm.witnesses()
    if not t.rels[0]:
        # the first relation is empty: drop it and lift by one logarithm
        th, fm, wit = _embed(JFrame(nodes, t.rels[1:]),
                             tuple(s - 1 for s in sigma[1:]))
        theta = e(th)
        return (theta, ComposeMap(fm, EllIter(1, theta)),
                {v: e(w) for v, w in wit.items()})

    # the root's plane has proper subtrees below it
    root = root_of(t)
    pd = planes(t, 0, check=False)
    alpha = pd.subblock_of(root)
    succ_planes = [b for a, b in pd.order if a == alpha]
    child_planes = [b for b in succ_planes
                    if not any((c, b) in pd.order for c in succ_planes if c != b)]
    r0 = t.rels[0]
    parts = []
    for beta in child_planes:
        x0 = min(beta, key=repr)
        below = frozenset(y for a, y in r0 if a == x0)
        sub = subframe(t, beta | below)
        th_i, fm_i, wit_i = _embed(sub, sigma)
        parts.append((th_i, sorted(map(repr, beta)), fm_i,
                      frozenset(sub.nodes), wit_i))
    parts.sort(key=lambda p: (p[0], p[1]))

    lam, f0, wit0 = _embed(subframe(t, alpha), sigma)
    prod = product([p[0] for p in parts], lam)

    seg, k_prev = [], ZERO
    for th_i, _, fm_i, own, _ in parts:
        k_hi = add(k_prev, th_i)
        seg.append((k_prev, k_hi, fm_i, own))
        k_prev = k_hi
    fmap = CaseIIMap(prod, SegmentSum(seg), f0, alpha)

    wit = {v: multiply(prod.w, w) for v, w in wit0.items()}
    m = len(parts)
    for i, (_, _, _, _, wit_i) in enumerate(parts, start=1):
        iota = i if i < m else 0
        base = add(add(prod.cells.alpha(iota), prod.cells.span0), ONE)
        for v, wv in wit_i.items():
            wit[v] = add(base, _span(wv))
    return prod.theta, fmap, wit


@dataclass
class Countermodel:
    theta: Ordinal
    levels: Tuple[Ordinal, ...]
    fmap: object
    tree: JFrame
    sigma: Tuple[int, ...]
    witnesses: Dict
    algebra: Dict  # node -> fiber BandSet, or None where not representable

    def space(self) -> PolySpace:
        return PolySpace(self.theta, self.levels)


def _check_sigma(sigma, n_rels: int) -> Tuple[int, ...]:
    out = []
    for s in sigma:
        if isinstance(s, Ordinal):
            if not s.is_finite():
                raise UnsupportedSigma(f"limit modality level {s}")
            s = s.to_int()
        if not isinstance(s, int) or s < 1:
            raise UnsupportedSigma(f"level {s!r} must be a positive integer")
        out.append(s)
    if len(out) != n_rels:
        raise UnsupportedSigma(
            f"sigma has {len(out)} levels for {n_rels} relations")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise UnsupportedSigma("sigma must be strictly increasing")
    return tuple(out)


def embed(t, sigma) -> Countermodel:
    t = make_jframe(t.nodes, t.rels)
    if not t.nodes:
        raise EmptyTree("cannot embed an empty tree")
    sigma = _check_sigma(sigma, len(t.rels))
    try:
        treelike = is_jtree(t)
    except InvalidFrame as exc:
        raise NotAJTree(str(exc))
    if not treelike:
        raise NotAJTree("planes do not nest as a tree")
    root = root_of(t)

    theta, fmap, wit = _embed(t, sigma)

    # theta stays below the fixed hyperexponential tower for the input size
    bound_height = len(t.nodes) * (max(sigma, default=0) + 1) + 2
    if bound_height < DEPTH_CAP - 1:
        assert theta < e_iter(bound_height, ONE)
    for v, w in wit.items():
        assert ONE <= w <= theta and fmap.apply(w) == v, (v, w)
    assert sets_equal(fmap.preimage([root]), interval(theta, theta), theta)

    algebra = {}
    for v in t.nodes:
        try:
            algebra[v] = fmap.preimage([v])
        except NotRepresentable:
            algebra[v] = None
    return Countermodel(theta, tuple(_nat(s) for s in sigma), fmap, t, sigma,
                        wit, algebra)


def countermodel_valuation(cm: Countermodel, t_val: Dict) -> Dict[int, BandSet]:
    out = {}
    for i, supp in t_val.items():
        try:
            out[i] = cm.fmap.preimage(supp)
        except NotRepresentable as exc:
            raise NotRepresentable(
                f"p{i} over {sorted(map(repr, supp))}: {exc}")
    return out


# --- verification ------------------------------------------------------------------


def _atoms(phi, acc: set):
    if isinstance(phi, Var):
        acc.add(phi.index)
    elif isinstance(phi, (Box, Dia, Not)):
        _atoms(phi.body, acc)
    elif isinstance(phi, (And, Or, Implies)):
        _atoms(phi.left, acc)
        _atoms(phi.right, acc)


class PointwiseUnsupported(EmbedError):
    pass


# Segment window for the cofinality test below.  The fibers the
# construction produces are eventually periodic along every canonical
# approach sequence (block patterns repeat with the map's period, a
# handful at most), so whether a set keeps meeting segments is decided
# by the tail of the window; _SEG_WINDOW segments with the last
# _SEG_TAIL inspected leaves generous slack over any period that can
# actually occur.
_SEG_WINDOW = 24
_SEG_TAIL = 12
_SEG_COEFF = 6


def _drop_tail(x: Ordinal) -> Ordinal:
    """x minus one copy of its last CNF term: g + w^e*c -> g + w^e*(c-1)."""
    e_, c = x.terms[-1]
    rest = x.terms[:-1]
    if c > 1:
        rest = rest + ((e_, c - 1),)
    return normalize(rest)


def _segment_offsets(m: int) -> List[Ordinal]:
    """Sample points inside a half-open segment of length w^m."""
    if m == 0:
        return [ZERO]
    if m == 1:
        return [_nat(b) for b in range(_SEG_COEFF + 1)]
    if m == 2:
        return [add(multiply(OMEGA, _nat(a)), _nat(b))
                for a in range(_SEG_COEFF + 1) for b in range(_SEG_COEFF + 1)]
    raise PointwiseUnsupported("approach step above w^2")


def _universe_eval(phi, cm: Countermodel, t_val: Dict) -> bool:
    """Pointwise evaluation of phi at theta, for theta <= w^3.

    Works directly with membership predicates instead of band sets, so
    the genuinely periodic fibers are no obstacle.  A limit x = g + w^e*c
    accumulates s at level 1 iff s keeps meeting the segments
    [y_n, y_{n+1}) with y_n = g + w^e*(c-1) + w^(e-1)*n; membership along
    those segments is eventually periodic for every set the construction
    produces, so a hit anywhere in the tail window decides cofinality.
    Levels >= 2 raise PointwiseUnsupported (they only arise together with
    theta > w^3, where this evaluator is never called)."""
    space = cm.space()
    memo: Dict[Tuple[int, Ordinal], bool] = {}

    def in_derived(body, x: Ordinal, lam: int) -> bool:
        if lam != 1:
            raise PointwiseUnsupported(f"pointwise derived set at level {lam}")
        if x <= ONE or x.is_successor():
            return False
        e_, _c = x.terms[-1]
        if not e_.is_finite() or e_.to_int() > 3:
            raise PointwiseUnsupported("limit point above w^3")
        base = _drop_tail(x)
        step = omega_pow(left_subtract(ONE, e_))
        offsets = _segment_offsets(e_.to_int() - 1)
        for n in range(_SEG_WINDOW, _SEG_WINDOW - _SEG_TAIL, -1):
            y0 = add(base, multiply(step, _nat(n)))
            if any(sat(body, add(y0, d)) for d in offsets
                   if ONE <= add(y0, d) < x):
                return True
        return False

    def sat(f, x: Ordinal) -> bool:
        key = (id(f), x)
        if key in memo:
            return memo[key]
        memo[key] = got = _sat(f, x)
        return got

    def _sat(f, x: Ordinal) -> bool:
        if isinstance(f, Var):
            if f.index not in t_val:
                raise UnboundVariable(f"p{f.index}")
            return cm.fmap.apply(x) in t_val[f.index]
        if isinstance(f, Top):
            return True
        if isinstance(f, Bot):
            return False
        if isinstance(f, Not):
            return not sat(f.body, x)
        if isinstance(f, And):
            return sat(f.left, x) and sat(f.right, x)
        if isinstance(f, Or):
            return sat(f.left, x) or sat(f.right, x)
        if isinstance(f, Implies):
            return not sat(f.left, x) or sat(f.right, x)
        if isinstance(f, Dia):
            return in_derived(f.body, x, space.level_at(f.index))
        if isinstance(f, Box):
            return not in_derived(Not(f.body), x, space.level_at(f.index))
        raise TypeError(f"unknown node {f!r}")

    return sat(phi, cm.theta)


def _partial_map_check(rep: JMapReport, cm: Countermodel, budget: int,
                       seed: int):
    """Fallback when some fibers are outside the band algebra: check what
    can be checked exactly, sample the rest, and record the gaps."""
    t, theta = cm.tree, cm.theta
    space = cm.space()
    nn = len(t.rels)
    missing = sorted((v for v in t.nodes if cm.algebra[v] is None), key=repr)
    rep.add("(b) fiber representability", "SKIPPED", True,
            f"no band fibers for {missing}")
    if nn == 0:
        return
    lam_top = space.level_at(_nat(nn - 1))
    nodes = tuple(t.nodes)

    if 2 ** len(nodes) <= budget:
        mode = "EXACT-WHERE-DEFINED"
        pool = [frozenset(c) for r in range(len(nodes) + 1)
                for c in itertools.combinations(nodes, r)]
    else:
        mode = "SAMPLED"
        rng = random.Random(seed)
        pool = [frozenset(x for x in nodes if rng.random() < 0.5)
                for _ in range(budget)]
    checked = skipped = 0
    bad = None
    for a in pool:
        try:
            lhs = cm.fmap.preimage(_frame_dia(t, a, nn - 1))
            rhs = derived_set(cm.fmap.preimage(a), lam_top, theta)
        except NotRepresentable:
            skipped += 1
            continue
        checked += 1
        if not sets_equal(lhs, rhs, theta):
            bad = a
            break
    rep.add("(b) (j1) d-map law on representable subsets", mode, bad is None,
            f"{checked} checked, {skipped} skipped" if bad is None
            else f"A={sorted(map(repr, bad))}")

    pts = sorted(set(endpoint_pool(theta)) | set(cm.witnesses.values()))
    bad_rank = None
    for x in pts:
        rho = topology.rank(x, lam_top)
        want = frame_rank(t, cm.fmap.apply(x), nn - 1)
        if not (rho.is_finite() and rho.to_int() == want):
            bad_rank = (x, want)
            break
    rep.add("(b) (j1) rank preservation", "SAMPLED", bad_rank is None,
            "" if bad_rank is None else f"x={bad_rank[0]}")

    for k in range(nn - 1):
        lam_k = space.level_at(_nat(k))
        for x in sorted(hereditary_roots(t, k), key=repr):
            below = frozenset(y for r in t.rels[k:] for a, y in r if a == x)
            try:
                ok3 = (is_open(cm.fmap.preimage(below), lam_k, theta)
                       and is_open(cm.fmap.preimage(below | {x}), lam_k, theta))
                rep.add(f"(b) (j3) root {x!r} at level {k}", "EXACT", ok3)
            except NotRepresentable as exc:
                rep.add(f"(b) (j3) root {x!r} at level {k}", "SKIPPED", True,
                        str(exc))
            fib = cm.algebra[x]
            if fib is None:
                rep.add(f"(b) (j4) fiber of {x!r} at level {k}", "SKIPPED",
                        True, "fiber not representable")
            else:
                ok4 = is_empty(intersect(derived_set(fib, lam_k, theta), fib))
                rep.add(f"(b) (j4) fiber of {x!r} discrete at level {k}",
                        "EXACT", ok4)


W3 = parse_ordinal("w^3")


def verify_countermodel(cm: Countermodel, phi, budget: int = 4096,
                        t_val: Optional[Dict] = None,
                        seed: int = 0) -> JMapReport:
    """Three-stage check: (a) phi holds at the tree root under some (or the
    given) valuation; (b) the map conditions, exactly when every fiber is
    a band set and partially otherwise; (c) theta satisfies phi under the
    pulled-back valuation, exactly when it is representable."""
    rep = JMapReport()
    root = root_of(cm.tree)

    acc: set = set()
    _atoms(phi, acc)
    candidates = [t_val] if t_val is not None else _valuations(
        sorted(acc), cm.tree.nodes)
    found = None
    for v in candidates:
        if root in eval_kripke(phi, cm.tree, v):
            found = v
            break
    rep.add("(a) satisfied at the root", "EXACT", found is not None,
            "" if found is not None else "no valuation found")

    ok_root = (cm.algebra.get(root) is not None
               and sets_equal(cm.algebra[root],
                              interval(cm.theta, cm.theta), cm.theta))
    rep.add("(b) root fiber is {theta}", "EXACT", ok_root)
    if all(cm.algebra[v] is not None for v in cm.tree.nodes):
        sub = jmap_check(cm.fmap, cm.space(), cm.tree, budget=budget,
                         seed=seed)
        for name, mode, ok, detail in sub.checks:
            rep.add("(b) " + name, mode, ok, detail)
    else:
        _partial_map_check(rep, cm, budget, seed)

    wit_bad = [v for v, w in cm.witnesses.items() if cm.fmap.apply(w) != v]
    rep.add("(b) witness table", "EXACT", not wit_bad,
            f"{len(cm.witnesses)} nodes")

    if found is None:
        rep.add("(c) semantic check", "SKIPPED", True, "no Kripke valuation")
        return rep
    try:
        v_bands = countermodel_valuation(cm, found)
    except NotRepresentable:
        v_bands = None
    if v_bands is not None:
        got = eval_topo(phi, cm.space(), v_bands)
        rep.add("(c) theta satisfies phi", "EXACT", member(cm.theta, got),
                bandset_to_text(got))
    elif cm.theta <= W3:
        try:
            rep.add("(c) theta satisfies phi", "UNIVERSE",
                    _universe_eval(phi, cm, found),
                    "pointwise over the approach segments")
        except PointwiseUnsupported as exc:
            rep.add("(c) semantic check", "SKIPPED", True, str(exc))
    else:
        rep.add("(c) semantic check", "SKIPPED", True,
                "valuation not band-representable and theta > w^3")
    return rep


# --- serialization -----------------------------------------------------------------


def _map_from_json(obj):
    tag = obj.get("map")
    if tag == "const":
        return ConstMap(obj["node"], parse_ordinal(obj["theta"]))
    if tag == "liter":
        return EllIter(obj["delta"], parse_ordinal(obj["theta"]))
    if tag == "otyp_up":
        return OtypUpMap(parse_ordinal(obj["xi"]), parse_ordinal(obj["theta"]))
    if tag == "compose":
        return ComposeMap(_map_from_json(obj["outer"]),
                          _map_from_json(obj["inner"]))
    if tag == "rank":
        return GLEmbedMap(obj["root"],
                          [_map_from_json(c) for c in obj["children"]])
    if tag == "segments":
        seg, k_prev = [], ZERO
        for part in obj["parts"]:
            fm = _map_from_json(part["fmap"])
            k_hi = add(k_prev, fm.theta)
            seg.append((k_prev, k_hi, fm, frozenset(part["nodes"])))
            k_prev = k_hi
        return SegmentSum(seg)
    if tag == "product":
        prod = product([parse_ordinal(k) for k in obj["kappas"]],
                       parse_ordinal(obj["lam"]))
        return CaseIIMap(prod, _map_from_json(obj["fstar"]),
                         _map_from_json(obj["f0"]), frozenset(obj["alpha"]))
    raise EmbedError(f"unknown map tag {tag!r}")


def countermodel_to_json(cm: Countermodel) -> dict:
    return {
        "theta": ordinal_to_text(cm.theta),
        "levels": [ordinal_to_text(o) for o in cm.levels],
        "sigma": list(cm.sigma),
        "tree": jframe_to_json(cm.tree),
        "fmap": cm.fmap.to_json(),
        "witnesses": [[v, ordinal_to_text(w)]
                      for v, w in sorted(cm.witnesses.items(),
                                         key=lambda p: repr(p[0]))],
        "algebra": [[v, None if s is None else bandset_to_text(s)]
                    for v, s in sorted(cm.algebra.items(),
                                       key=lambda p: repr(p[0]))],
    }


def countermodel_from_json(obj) -> Countermodel:
    try:
        theta = parse_ordinal(obj["theta"])
        levels = tuple(parse_ordinal(o) for o in obj["levels"])
        sigma = tuple(int(s) for s in obj["sigma"])
        tree = jframe_from_json(obj["tree"])
        fmap = _map_from_json(obj["fmap"])
        wit = {v: parse_ordinal(w) for v, w in obj["witnesses"]}
        algebra = {v: None if s is None else parse_bandset(s)
                   for v, s in obj["algebra"]}
    except (KeyError, TypeError, ValueError) as exc:
        raise EmbedError(f"malformed countermodel object: {exc!r}")
    return Countermodel(theta, levels, fmap, tree, sigma, wit, algebra)
