"""Definable subsets of ordinal intervals and their derived-set operators.

A Band is a closed interval [lo, hi] refined by finitely many constraints
"lower < l^k(x) <= upper", one per level k >= 1 (a level-0 constraint is just
the interval itself).  A BandSet is a finite union of bands; it is the algebra
of definable sets over a domain [1, theta], closed under boolean operations
and under the derived-set operator of every finite-level topology I_lam.

I_0 is the initial-segment topology, I_1 the order topology, and I_lam is
generated by the sets {x: c < l^k(x) <= d} for k < lam.  The rank function of
I_lam is l^lam.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

from .ordinal import (
    Ordinal,
    OMEGA,
    ONE,
    ZERO,
    add,
    ell,
    ell_iter,
    omega_pow,
    ordinal_to_text,
    parse_ordinal,
)


class TopologyError(Exception):
    pass


class UnsupportedLevel(TopologyError):
    """Infinite constraint level or topology level."""


class NonStabilizing(TopologyError):
    """Limit-stage derived-set iteration failed to stabilize in time."""


# constraint bounds: None as lower means -1, None as upper means infinity
Bound = Tuple[Optional[Ordinal], Optional[Ordinal]]


def _sat(v: Ordinal, cons: Dict[int, Bound]) -> bool:
    for k, (c, d) in cons.items():
        val = ell_iter(Ordinal.from_int(k), v)
        if c is not None and not (c < val):
            return False
        if d is not None and not (val <= d):
            return False
    return True


def _min_sol(lo: Ordinal, hi: Optional[Ordinal], cons: Dict[int, Bound]) -> Optional[Ordinal]:
    """Least v >= lo with v <= hi (None = unbounded) meeting every constraint.

    If lo itself fails, every larger candidate is lo + z with z > 0 and
    l^k(lo + z) = l^k(z), so the least fix is lo + w^w0 where w0 is the least
    feasible value of l(v) for the level-shifted system.
    """
    if hi is not None and lo > hi:
        return None
    if _sat(lo, cons):
        return lo
    c1, d1 = cons.get(1, (None, None))
    inner = {k - 1: b for k, b in cons.items() if k >= 2}
    w = _min_sol(add(c1, ONE) if c1 is not None else ZERO, d1, inner)
    if w is None:
        return None
    cand = add(lo, omega_pow(w))
    if hi is not None and cand > hi:
        return None
    return cand


@dataclass(frozen=True)
class Band:
    """[lo, hi] plus constraints lower < l^k(x) <= upper; never empty."""

    lo: Ordinal
    hi: Ordinal
    cons: Tuple[Tuple[int, Optional[Ordinal], Optional[Ordinal]], ...]

    def cons_dict(self) -> Dict[int, Bound]:
        return {k: (c, d) for k, c, d in self.cons}

    def member(self, x: Ordinal) -> bool:
        return self.lo <= x <= self.hi and _sat(x, self.cons_dict())

    def min(self) -> Ordinal:
        m = _min_sol(self.lo, self.hi, self.cons_dict())
        assert m is not None  # bands are dropped when empty
        return m

    def __repr__(self):
        return f"Band<{band_to_text(self)}>"


@dataclass(frozen=True)
class BandSet:
    bands: Tuple[Band, ...]

    def __repr__(self):
        return f"BandSet<{bandset_to_text(self)}>"


EMPTY = BandSet(())


def _merge_bound(a: Bound, b: Bound) -> Bound:
    lows = [x for x in (a[0], b[0]) if x is not None]
    ups = [x for x in (a[1], b[1]) if x is not None]
    return (max(lows) if lows else None, min(ups) if ups else None)


def make_band(lo: Ordinal, hi: Ordinal, cons: Dict[int, Bound] = None) -> Optional[Band]:
    """Normalize and solve; returns None when the band is empty."""
    merged: Dict[int, Bound] = {}
    for k, bound in (cons or {}).items():
        if k < 0:
            raise UnsupportedLevel(f"level {k}")
        merged[k] = _merge_bound(merged.get(k, (None, None)), bound)
    # fold level-0 constraints into the interval
    if 0 in merged:
        c, d = merged.pop(0)
        if c is not None:
            lo = max(lo, add(c, ONE))
        if d is not None:
            hi = min(hi, d)
    clean = {}
    for k, (c, d) in sorted(merged.items()):
        if c is not None and d is not None and d <= c:
            return None
        if c is None and d is None:
            continue
        clean[k] = (c, d)
    if lo > hi or _min_sol(lo, hi, clean) is None:
        return None
    return Band(lo, hi, tuple((k, c, d) for k, (c, d) in sorted(clean.items())))


def _band_subsumes(a: Band, b: Band) -> bool:
    """Syntactic check that a contains b."""
    if not (a.lo <= b.lo and b.hi <= a.hi):
        return False
    bc = b.cons_dict()
    for k, (c, d) in a.cons_dict().items():
        if k not in bc:
            return False
        c2, d2 = bc[k]
        if c is not None and (c2 is None or c2 < c):
            return False
        if d is not None and (d2 is None or d2 > d):
            return False
    return True


def bandset(bands: Iterable[Optional[Band]]) -> BandSet:
    out = []
    for b in bands:
        if b is None:
            continue
        if any(_band_subsumes(o, b) for o in out):
            continue
        out = [o for o in out if not _band_subsumes(b, o)]
        out.append(b)
    return BandSet(tuple(out))


def interval(lo: Ordinal, hi: Ordinal) -> BandSet:
    return bandset([make_band(lo, hi)])


def member(x: Ordinal, s: BandSet) -> bool:
    return any(b.member(x) for b in s.bands)


def is_empty(s: BandSet) -> bool:
    return not s.bands  # emptiness is solved eagerly on construction


def min_witness(s: BandSet) -> Optional[Ordinal]:
    if is_empty(s):
        return None
    return min(b.min() for b in s.bands)


def union(s: BandSet, t: BandSet) -> BandSet:
    return bandset(list(s.bands) + list(t.bands))


def _band_intersect(a: Band, b: Band) -> Optional[Band]:
    cons = a.cons_dict()
    for k, bound in b.cons_dict().items():
        cons[k] = _merge_bound(cons.get(k, (None, None)), bound)
    return make_band(max(a.lo, b.lo), min(a.hi, b.hi), cons)


def intersect(s: BandSet, t: BandSet) -> BandSet:
    return bandset(_band_intersect(a, b) for a in s.bands for b in t.bands)


def _trim_last(t: Ordinal) -> Ordinal:
    """Drop one copy of the last CNF term: mu + w^r*c -> mu + w^r*(c-1)."""
    e_, c = t.terms[-1]
    rest = t.terms[:-1]
    if c > 1:
        return Ordinal(rest + ((e_, c - 1),))
    return Ordinal(rest)


def _strict_cons(k: int, t: Ordinal) -> list:
    """Constraint dicts whose union is {x: l^k(x) < t}."""
    if t.is_zero():
        return []
    if t.is_successor():
        return [{k: (None, _pred(t))}]
    tau = _trim_last(t)
    out = [{k: (None, tau)}]
    for deep in _strict_cons(k + 1, ell(t)):
        d = dict(deep)
        d[k] = _merge_bound(d.get(k, (None, None)), (tau, t))
        out.append(d)
    return out


def _pred(t: Ordinal) -> Ordinal:
    assert t.is_successor()
    return _trim_last(t)


def _below(a: Ordinal, dom_lo: Ordinal) -> BandSet:
    """{x in [dom_lo, _): x < a} as a BandSet."""
    if a <= dom_lo:
        return EMPTY
    if a.is_successor():
        return interval(dom_lo, _pred(a))
    nu = _trim_last(a)
    parts = [make_band(dom_lo, nu)] if nu >= dom_lo else []
    for d in _strict_cons(1, ell(a)):
        parts.append(make_band(max(dom_lo, add(nu, ONE)), a, d))
    return bandset(parts)


def _band_complement(b: Band, lo: Ordinal, hi: Ordinal) -> BandSet:
    dom = make_band(lo, hi)
    parts = list(_below(b.lo, lo).bands)
    parts.append(make_band(add(b.hi, ONE), hi))
    for k, c, d in b.cons:
        if c is not None:
            parts.append(make_band(lo, hi, {k: (None, c)}))
        if d is not None:
            parts.append(make_band(lo, hi, {k: (d, None)}))
    if dom is None:
        return EMPTY
    return bandset(_band_intersect(p, dom) for p in parts if p is not None)


def complement_within(s: BandSet, lo: Ordinal, hi: Ordinal) -> BandSet:
    out = interval(lo, hi)
    for b in s.bands:
        out = intersect(out, _band_complement(b, lo, hi))
    return out


def subset_of(s: BandSet, t: BandSet, theta: Ordinal) -> bool:
    return is_empty(intersect(s, complement_within(t, ONE, theta)))


def sets_equal(s: BandSet, t: BandSet, theta: Ordinal) -> bool:
    return subset_of(s, t, theta) and subset_of(t, s, theta)


def rank(x: Ordinal, lam: int) -> Ordinal:
    return ell_iter(Ordinal.from_int(lam), x)


def _deep_min(b: Band, lam: int) -> Optional[Ordinal]:
    """Least feasible value of l^lam on points of b, ignoring shallower levels."""
    cd = b.cons_dict()
    c0, d0 = cd.get(lam, (None, None))
    inner = {k - lam: bound for k, bound in cd.items() if k > lam}
    return _min_sol(add(c0, ONE) if c0 is not None else ZERO, d0, inner)


def _derived_band(b: Band, lam: int, theta: Ordinal) -> Optional[Band]:
    if lam == 0:
        # initial-segment topology: x is a limit of b iff some point of b
        # lies strictly below x
        return make_band(add(b.min(), ONE), theta)
    m = _deep_min(b, lam)
    if m is None:
        return None
    cons = {k: bound for k, bound in b.cons_dict().items() if k < lam}
    cons[lam] = (m, None)
    return make_band(add(b.lo, ONE), min(b.hi, theta), cons)


def derived_set(s: BandSet, lam: int, theta: Ordinal) -> BandSet:
    """Exact derived set of s in the topology I_lam over [1, theta].

    For a single band the accumulation points are exactly the x with
    lo < x <= hi, satisfying b's constraints below level lam, whose l^lam
    value strictly dominates the least l^lam value feasible for b's
    constraints at levels >= lam.  Approach at each level ksi < lam is
    always strict: near any x, the points y share x's CNF trunk and their
    l-values at every deeper level drop below x's, so a neighborhood basis
    pins l^ksi(y) into (c, l^ksi(x)) for arbitrarily large c.
    """
    if lam < 0:
        raise UnsupportedLevel(str(lam))
    return bandset(_derived_band(b, lam, theta) for b in s.bands)


def _approaches(b: Band, x: Ordinal, lam: int) -> bool:
    """Pointwise: every I_lam-neighborhood of x meets b \\ {x}."""
    cd = b.cons_dict()
    lo: Optional[Ordinal] = b.lo
    hi: Optional[Ordinal] = b.hi
    t = x
    for j in range(lam):
        if not t.is_limit():
            return False
        if lo is not None and lo >= t:
            return False
        if hi is not None and hi < t:
            return False
        if j == lam - 1:
            break
        c, d = cd.get(j + 1, (None, None))
        lo = add(c, ONE) if c is not None else ZERO
        hi = d
        t = ell(t)
    m = _deep_min(b, lam)
    return m is not None and m < ell(t)


def member_of_derived(x: Ordinal, s: BandSet, lam: int) -> bool:
    if lam == 0:
        return any(b.min() < x for b in s.bands)
    return any(_approaches(b, x, lam) for b in s.bands)


def is_open(s: BandSet, lam: int, theta: Ordinal) -> bool:
    comp = complement_within(s, ONE, theta)
    return is_empty(intersect(s, derived_set(comp, lam, theta)))


def _geq_set(k: int, mu: Ordinal, theta: Ordinal) -> BandSet:
    """{x in [1, theta]: l^k(x) >= mu} as a BandSet."""
    if mu.is_zero():
        return interval(ONE, theta)
    if mu.is_successor():
        return bandset([make_band(ONE, theta, {k: (_pred(mu), None)})])
    strict = bandset(make_band(ONE, theta, d) for d in _strict_cons(k, mu))
    return complement_within(strict, ONE, theta)


def _limit_band(b: Band, lam: int, theta: Ordinal) -> BandSet:
    """Intersection of the finite derived-set iterates of a single band.

    From the first derived set on, each further application only advances
    the interval's lo and the level-lam lower bound by one, so the
    omega-stage is the band with both bounds advanced by omega.
    """
    a = _derived_band(b, lam, theta)
    if a is None:
        return EMPTY
    m = next(c for k, c, d in a.cons if k == lam)
    cons = {k: (c, d) for k, c, d in a.cons if k < lam}
    tail = intersect(
        bandset([make_band(add(a.lo, OMEGA), a.hi, cons)]),
        _geq_set(lam, add(m, OMEGA), theta),
    )
    return intersect(tail, bandset([b]))


def derived_iter(s: BandSet, lam: int, alpha: Ordinal, theta: Ordinal) -> BandSet:
    """d^alpha(s); the omega-limit stage is the (closed-form) intersection
    of the finite iterates.  Supported for alpha < w^2."""
    if any(e_ > ONE for e_, _ in alpha.terms):
        raise NonStabilizing(f"iteration index {alpha} beyond the omega stage")
    if lam == 0 and not alpha.is_finite():
        raise UnsupportedLevel("transfinite iteration at level 0")
    out = s
    for e_, c in alpha.terms:
        for _ in range(c):
            if e_.is_zero():
                out = derived_set(out, lam, theta)
            else:
                out = bandset(
                    bb for b in out.bands for bb in _limit_band(b, lam, theta).bands
                )
    return out


def separating_nbhd(x: Ordinal, lam: int, theta: Ordinal) -> BandSet:
    """I_lam-open band U containing x with rank(y) < rank(x) on U \\ {x}."""

    def sep_lower(t: Ordinal) -> Optional[Ordinal]:
        if t.is_zero():
            return None
        return _trim_last(t)

    c0 = sep_lower(x)
    lo = add(c0, ONE) if c0 is not None else ONE
    cons = {}
    t = x
    for k in range(1, lam):
        t = ell(t) if not t.is_zero() else ZERO
        cons[k] = (sep_lower(t), t)
    return bandset([make_band(max(lo, ONE), min(x, theta), cons)])


# --- textual syntax ---------------------------------------------------------
#
#   bandset := band (';' band)*
#   band    := '[' ord ',' ord ']' ('&' 'l' ('^' nat)? 'in' '(' low ',' ord ']')*
#   low     := '-1' | ord ;  upper bound may be 'inf'


def band_to_text(b: Band) -> str:
    parts = [f"[{ordinal_to_text(b.lo)},{ordinal_to_text(b.hi)}]"]
    for k, c, d in b.cons:
        lo = "-1" if c is None else ordinal_to_text(c)
        hi = "inf" if d is None else ordinal_to_text(d)
        parts.append(f"l^{k} in ({lo},{hi}]")
    return " & ".join(parts)


def bandset_to_text(s: BandSet) -> str:
    if is_empty(s):
        return "empty"
    return "; ".join(band_to_text(b) for b in s.bands)


def _parse_band(text: str) -> Optional[Band]:
    chunks = [c.strip() for c in text.split("&")]
    head = chunks[0]
    if not (head.startswith("[") and head.endswith("]")):
        raise TopologyError(f"expected [lo,hi], got {head!r}")
    lo_txt, hi_txt = _split_bounds(head[1:-1])
    cons: Dict[int, Bound] = {}
    for chunk in chunks[1:]:
        if not chunk.startswith("l"):
            raise TopologyError(f"expected l^k constraint, got {chunk!r}")
        rest = chunk[1:].strip()
        k = 1
        if rest.startswith("^"):
            rest = rest[1:]
            num = ""
            while rest and rest[0].isdigit():
                num += rest[0]
                rest = rest[1:]
            k = int(num)
        rest = rest.strip()
        if not rest.startswith("in"):
            raise TopologyError(f"expected 'in' in {chunk!r}")
        rest = rest[2:].strip()
        if not (rest.startswith("(") and rest.endswith("]")):
            raise TopologyError(f"expected (c,d] in {chunk!r}")
        c_txt, d_txt = _split_bounds(rest[1:-1])
        c = None if c_txt.strip() == "-1" else parse_ordinal(c_txt)
        d = None if d_txt.strip() == "inf" else parse_ordinal(d_txt)
        cons[k] = _merge_bound(cons.get(k, (None, None)), (c, d))
    return make_band(parse_ordinal(lo_txt), parse_ordinal(hi_txt), cons)


def _split_bounds(text: str) -> Tuple[str, str]:
    depth = 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            return text[:i], text[i + 1:]
    raise TopologyError(f"expected ',' in {text!r}")


def parse_bandset(text: str) -> BandSet:
    text = text.strip()
    if text == "empty" or not text:
        return EMPTY
    return bandset(_parse_band(chunk) for chunk in text.split(";"))
