"""Shared strategies and independent oracles for the test suite."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from ordtopo.ordinal import (
    Ordinal,
    ZERO,
    OMEGA,
    add,
    compare,
    multiply,
    normalize,
    omega_pow,
)


# --- dense-polynomial oracle ------------------------------------------------
# Ordinals below w^D are lists of coefficients [c0, c1, ..., c_{D-1}] for
# w^0*c0 + w^1*c1 + ...  The arithmetic below is written from the textbook
# rules against this unrelated representation, so it cross-checks the CNF
# tree code rather than mirroring it.

POLY_DEG = 16


def poly_of(o: Ordinal):
    cs = [0] * POLY_DEG
    for e_, c in o.terms:
        assert e_.is_finite(), "poly oracle needs finite exponents"
        cs[e_.to_int()] = c
    return cs


def poly_to_ordinal(cs) -> Ordinal:
    return normalize(
        (Ordinal.from_int(k), c) for k, c in sorted(enumerate(cs), reverse=True)
    )


def poly_deg(p):
    for k in range(POLY_DEG - 1, -1, -1):
        if p[k]:
            return k
    return -1  # zero


def poly_cmp(p, q):
    for k in range(POLY_DEG - 1, -1, -1):
        if p[k] != q[k]:
            return -1 if p[k] < q[k] else 1
    return 0


def poly_add(p, q):
    dq = poly_deg(q)
    if dq < 0:
        return list(p)
    out = [0] * POLY_DEG
    out[dq] = p[dq] + q[dq]
    for k in range(dq + 1, POLY_DEG):
        out[k] = p[k]
    for k in range(dq - 1, -1, -1):
        out[k] = q[k]
    return out


def poly_mul(p, q):
    dp = poly_deg(p)
    if dp < 0 or poly_deg(q) < 0:
        return [0] * POLY_DEG
    out = [0] * POLY_DEG
    # p * w^k*c = w^(dp+k)*c for k > 0; p * c clobbers only the lead term
    acc = [0] * POLY_DEG
    for k in range(POLY_DEG - 1, 0, -1):
        if q[k]:
            term = [0] * POLY_DEG
            term[dp + k] = q[k]
            acc = poly_add(acc, term)
    if q[0]:
        term = list(p)
        term[dp] = p[dp] * q[0]
        acc = poly_add(acc, term)
    return acc


# --- random generators ------------------------------------------------------


def random_poly_ordinal(rng: random.Random, max_deg=5, max_coeff=6) -> Ordinal:
    cs = [0] * POLY_DEG
    for _ in range(rng.randint(0, 4)):
        cs[rng.randint(0, max_deg)] = rng.randint(0, max_coeff)
    return poly_to_ordinal(cs)


def random_ordinal(rng: random.Random, depth=3, max_coeff=5) -> Ordinal:
    """Random CNF term with nested exponents."""
    if depth == 0 or rng.random() < 0.3:
        return Ordinal.from_int(rng.randint(0, max_coeff))
    acc = ZERO
    for _ in range(rng.randint(1, 3)):
        exp = random_ordinal(rng, depth - 1, max_coeff)
        acc = add(acc, multiply(omega_pow(exp), Ordinal.from_int(rng.randint(1, max_coeff))))
    return acc


# --- finite universe and brute-force accumulation oracle ---------------------
# The universe is every ordinal <= w^3 with CNF coefficients <= 4.  The oracle
# works on an integer encoding of the polynomial w^2*a + w*b + c (plus a
# sentinel for w^3 itself), so it shares no code with the band solver.

_W3KEY = 10**6


def finite_universe(max_coeff=4):
    from ordtopo.ordinal import parse_ordinal

    out = [parse_ordinal("w^3")]
    w2, w1 = parse_ordinal("w^2"), OMEGA
    for a in range(max_coeff + 1):
        for b in range(max_coeff + 1):
            for c in range(max_coeff + 1):
                if a or b or c:
                    out.append(add(add(multiply(w2, Ordinal.from_int(a)),
                                       multiply(w1, Ordinal.from_int(b))),
                                   Ordinal.from_int(c)))
    return out


def enc(o: Ordinal) -> int:
    """Order-preserving integer key for ordinals <= w^3 with coefficients < 100."""
    abc = [0, 0, 0]
    for e_, c in o.terms:
        k = e_.to_int()
        if k == 3:
            return _W3KEY
        abc[k] = c
    return abc[2] * 10**4 + abc[1] * 10**2 + abc[0]


def _lkey(k: int) -> int:
    """End-logarithm on encoded values (0 is a fixed point)."""
    if k == _W3KEY:
        return 3
    if k % 100:
        return 0
    if (k // 100) % 100:
        return 1
    return 2 if k else 0


def _lev(k: int, xi: int) -> int:
    for _ in range(xi):
        k = _lkey(k)
    return k


def encode_bandset(s):
    out = []
    for b in s.bands:
        cons = [(k, -1 if c is None else enc(c), None if d is None else enc(d))
                for k, c, d in b.cons]
        out.append((enc(b.lo), enc(b.hi), cons))
    return out


# every candidate witness: ordinals <= w^3 with coefficients <= 9, as the
# tuple of encoded l-iterates (y, ly, l2y, l3y)
_YTABLE = None


def _ytable():
    global _YTABLE
    if _YTABLE is None:
        keys = [_W3KEY] + [
            a * 10**4 + b * 10**2 + c
            for a in range(10) for b in range(10) for c in range(10)
            if a or b or c
        ]
        _YTABLE = [(k, _lkey(k), _lev(k, 2), _lev(k, 3)) for k in keys]
    return _YTABLE


_UKEYS = None


def _ukeys():
    global _UKEYS
    if _UKEYS is None:
        _UKEYS = sorted({enc(u) for u in finite_universe()} | {0, -1})
    return _UKEYS


def oracle_member_of_derived(x: Ordinal, s_enc, lam: int) -> bool:
    """Brute-force accumulation test: thresholds from the finite universe.

    x is a limit of s in I_lam iff the tightest basic neighborhood
    {y: c_xi < l^xi(y) <= l^xi(x)} with thresholds c_xi drawn from the
    universe still meets s away from x (tightening c_xi only shrinks it,
    so only the maximal threshold vector matters).
    """
    import bisect

    xk = enc(x)
    tx = [_lev(xk, xi) for xi in range(lam)]
    uk = _ukeys()
    cs = []
    for xi in range(lam):
        i = bisect.bisect_left(uk, tx[xi])
        cs.append(uk[i - 1])  # largest universe key strictly below l^xi(x)

    def in_s(yk):
        for lo, hi, cons in s_enc:
            if lo <= yk[0] <= hi and all(c < yk[k] <= (10**9 if d is None else d)
                                         for k, c, d in cons):
                return True
        return False

    for yk in _ytable():
        if yk[0] == xk:
            continue
        if all(cs[xi] < yk[xi] <= tx[xi] for xi in range(lam)) and in_s(yk):
            return True
    return False


def random_bandset_u(rng: random.Random, universe, max_bands=3, max_level=3):
    """Random BandSet with endpoints in the universe and small level bounds."""
    from ordtopo.topology import bandset, make_band

    bands = []
    for _ in range(rng.randint(1, max_bands)):
        lo, hi = sorted(rng.sample(universe, 2))
        cons = {}
        for k in range(1, max_level + 1):
            if rng.random() < 0.4:
                c = rng.choice([None, 0, 1, 2, 3])
                d = rng.choice([None, 0, 1, 2, 3])
                cons[k] = (None if c is None else Ordinal.from_int(c),
                           None if d is None else Ordinal.from_int(d))
        bands.append(make_band(lo, hi, cons))
    return bandset(bands)


def ell_preimage(a, theta: Ordinal):
    """Preimage of a codomain BandSet under l: [1, theta] -> [0, L(theta)]."""
    from ordtopo.topology import (
        EMPTY, _geq_set, _merge_bound, bandset, intersect, make_band, union,
    )
    from ordtopo.ordinal import ONE

    out = EMPTY
    for b in a.bands:
        cons = {k + 1: (c, d) for k, c, d in b.cons}
        cons[1] = _merge_bound(cons.get(1, (None, None)), (None, b.hi))
        part = bandset([make_band(ONE, theta, cons)])
        if not b.lo.is_zero():
            part = intersect(part, _geq_set(1, b.lo, theta))
        out = union(out, part)
    return out


# --- small Kripke frames ------------------------------------------------------

from collections import namedtuple

KFrame = namedtuple("KFrame", "nodes rels")


def transitive_closure(pairs):
    rel = set(pairs)
    changed = True
    while changed:
        changed = False
        for a, b in list(rel):
            for c, d in list(rel):
                if b == c and (a, d) not in rel:
                    rel.add((a, d))
                    changed = True
    return frozenset(rel)


def all_trees(max_nodes):
    """All rooted trees on 0..n-1 (0 the root) as (frame, root) with the
    transitive strict order as the single relation."""
    out = []
    for n in range(1, max_nodes + 1):
        def gen(parents):
            i = len(parents) + 1
            if i >= n:
                edges = [(p, k + 1) for k, p in enumerate(parents)]
                rel = transitive_closure(edges)
                out.append((KFrame(tuple(range(n)), (rel,)), 0))
                return
            for p in range(i):
                gen(parents + [p])
        gen([])
    return out


@st.composite
def ordinals(draw, max_depth=3, max_terms=3, max_coeff=5):
    if max_depth == 0:
        return Ordinal.from_int(draw(st.integers(0, max_coeff)))
    n = draw(st.integers(0, max_terms))
    raw = []
    for _ in range(n):
        exp = draw(ordinals(max_depth=max_depth - 1, max_terms=2, max_coeff=3))
        raw.append((exp, draw(st.integers(1, max_coeff))))
    return normalize(raw)


def positive_ordinals(**kw):
    return ordinals(**kw).filter(lambda o: not o.is_zero())
