import random

import pytest

import helpers
from ordtopo.ordinal import OMEGA, ONE, Ordinal, ZERO, ell_iter, parse_ordinal
from ordtopo.topology import (
    EMPTY,
    Band,
    BandSet,
    NonStabilizing,
    UnsupportedLevel,
    band_to_text,
    bandset,
    bandset_to_text,
    complement_within,
    derived_iter,
    derived_set,
    intersect,
    interval,
    is_empty,
    is_open,
    make_band,
    member,
    member_of_derived,
    min_witness,
    parse_bandset,
    rank,
    separating_nbhd,
    sets_equal,
    subset_of,
    union,
)

o = parse_ordinal


def bs(text):
    return parse_bandset(text)


W2 = o("w^2")
W3 = o("w^3")
WW = o("w^w")

SUCCESSORS = bs("[1,w^2] & l in (-1,0]")
LIMITS = bs("[1,w^2] & l in (0,inf]")


def test_member_goldens():
    assert member(o("5"), SUCCESSORS)
    assert not member(OMEGA, SUCCESSORS)
    assert member(OMEGA, interval(ONE, W2))


def test_boolean_goldens():
    comp = complement_within(SUCCESSORS, ONE, W2)
    assert sets_equal(comp, LIMITS, W2)
    assert is_empty(intersect(SUCCESSORS, EMPTY))
    assert sets_equal(union(SUCCESSORS, LIMITS), interval(ONE, W2), W2)


def test_is_empty_goldens():
    assert is_empty(bs("[1,w] & l in (1,2]"))
    s = bs("[1,w^2] & l in (0,1]")
    assert not is_empty(s)
    assert min_witness(s) == OMEGA
    assert make_band(o("5"), o("3")) is None
    assert is_empty(interval(o("5"), o("3")))


def test_min_witness_goldens():
    assert min_witness(bs("[1,w^w] & l in (0,1]")) == OMEGA
    assert min_witness(bs("[1,w^w] & l^2 in (0,1]")) == WW
    assert min_witness(EMPTY) is None


def test_rank_goldens():
    assert rank(o("w^3*2"), 1) == o("3")
    assert rank(o("5"), 1) == ZERO
    assert rank(WW, 2) == ONE


def test_is_open_goldens():
    assert is_open(bs("[w+1,w*2]"), 1, W2)
    assert not is_open(bs("[w,w]"), 1, W2)
    assert is_open(bs("[w,w] & l in (0,1]"), 2, W2)
    # whole domain and empty set are always open
    assert is_open(interval(ONE, W2), 1, W2)
    assert is_open(EMPTY, 3, W2)


def test_derived_set_goldens():
    assert sets_equal(derived_set(SUCCESSORS, 1, W2), LIMITS, W2)
    assert is_empty(derived_set(EMPTY, 2, W2))
    assert is_empty(derived_set(bs("[1,w^w] & l in (0,1]"), 2, WW))


def test_derived_set_brute_small():
    # order-topology accumulation of the successors, brute-forced over all
    # ordinals <= w*5 of CNF depth <= 2
    pts = [x for x in helpers.finite_universe() if x <= o("w*5")]
    d = derived_set(bs("[1,w*5] & l in (-1,0]"), 1, o("w*5"))
    for x in pts:
        assert member(x, d) == (x.is_limit() and x <= o("w*5"))


def test_derived_iter_goldens():
    assert sets_equal(derived_iter(interval(ONE, W2), 1, o("2"), W2),
                      interval(W2, W2), W2)
    s = bs("[1,w^2] & l in (0,1]")
    assert derived_iter(s, 1, ZERO, W2) == s
    dw = derived_iter(interval(ONE, WW), 1, OMEGA, WW)
    assert sets_equal(dw, interval(WW, WW), WW)
    assert is_empty(derived_iter(interval(ONE, WW), 1, o("w+1"), WW))
    with pytest.raises(NonStabilizing):
        derived_iter(interval(ONE, WW), 1, o("w^2"), WW)
    with pytest.raises(UnsupportedLevel):
        derived_iter(interval(ONE, WW), 0, OMEGA, WW)


def test_derived_iter_omega_wide_domain():
    theta = o("w^w*2")
    dw = derived_iter(interval(ONE, theta), 1, OMEGA, theta)
    assert member(WW, dw)
    assert member(o("w^w*2"), dw)
    assert not member(o("w^w+w"), dw)
    assert not member(o("w^3*4"), dw)


def test_separating_nbhd_post():
    theta = WW
    for x in [o("5"), OMEGA, o("w*3+1"), o("w^2*2"), WW, o("w^3+w")]:
        for lam in (1, 2, 3):
            u = separating_nbhd(x, lam, theta)
            assert member(x, u)
            assert is_open(u, lam, theta)
            for y in helpers.finite_universe():
                if y != x and member(y, u):
                    assert rank(y, lam) < rank(x, lam)


def test_separating_nbhd_goldens():
    assert sets_equal(separating_nbhd(o("5"), 1, W2), interval(o("5"), o("5")), W2)
    u = separating_nbhd(OMEGA, 1, W2)
    assert member(OMEGA, u) and min_witness(u) == ONE
    u2 = separating_nbhd(WW, 2, WW)
    assert sets_equal(u2, bs("[1,w^w] & l in (0,w]"), WW)


def test_band_text_round_trip():
    for text in ["[1,w^2] & l^1 in (-1,0]",
                 "[w,w^w*2] & l^1 in (0,w] & l^2 in (-1,1]",
                 "[1,w^3]"]:
        s = bs(text)
        assert parse_bandset(bandset_to_text(s)) == s
    assert bandset_to_text(EMPTY) == "empty"
    assert parse_bandset("empty") == EMPTY
    rng = random.Random(11)
    for _ in range(50):
        s = helpers.random_bandset_u(rng, helpers.finite_universe())
        assert parse_bandset(bandset_to_text(s)) == s


# --- properties ---------------------------------------------------------------


def test_derived_additive_and_monotone():
    rng = random.Random(23)
    uni = helpers.finite_universe()
    for _ in range(60):
        a = helpers.random_bandset_u(rng, uni)
        b = helpers.random_bandset_u(rng, uni)
        lam = rng.randint(1, 3)
        da, db = derived_set(a, lam, W3), derived_set(b, lam, W3)
        assert sets_equal(derived_set(union(a, b), lam, W3), union(da, db), W3)
        assert subset_of(derived_set(intersect(a, b), lam, W3), da, W3)


def test_level_monotonicity():
    rng = random.Random(29)
    uni = helpers.finite_universe()
    for _ in range(40):
        a = helpers.random_bandset_u(rng, uni)
        for lam in (0, 1, 2):
            assert subset_of(derived_set(a, lam + 1, W3), derived_set(a, lam, W3), W3)


def test_scatteredness():
    for theta, lam in [(W2, 1), (W3, 1), (WW, 2)]:
        ht = add_one(rank(theta, lam))
        assert is_empty(derived_iter(interval(ONE, theta), lam, ht, theta))
        # one step earlier is still nonempty
        assert not is_empty(derived_iter(interval(ONE, theta), lam, rank(theta, lam), theta))
    assert is_empty(derived_iter(interval(ONE, WW), 1, o("w+1"), WW))
    assert not is_empty(derived_iter(interval(ONE, WW), 1, OMEGA, WW))


def add_one(x):
    from ordtopo.ordinal import add

    return add(x, ONE)


def test_rank_law():
    uni = helpers.finite_universe()
    full = interval(ONE, W3)
    for lam in (1, 2, 3):
        for x in uni:
            assert member_of_derived(x, full, lam) == (rank(x, lam) >= ONE)
        for alpha in [ZERO, ONE, o("3"), o("5"), OMEGA, o("w+1")]:
            d = derived_iter(full, lam, alpha, W3)
            for x in uni:
                assert member(x, d) == (rank(x, lam) >= alpha), (x, lam, alpha)


def test_is_open_closure_agreement():
    rng = random.Random(31)
    uni = helpers.finite_universe()
    for _ in range(60):
        s = helpers.random_bandset_u(rng, uni)
        lam = rng.randint(0, 3)
        comp = complement_within(s, ONE, W3)
        assert is_open(s, lam, W3) == subset_of(derived_set(comp, lam, W3), comp, W3)


def test_member_of_derived_matches_assembled_set():
    rng = random.Random(37)
    uni = helpers.finite_universe()
    for _ in range(40):
        s = helpers.random_bandset_u(rng, uni)
        lam = rng.randint(0, 3)
        d = derived_set(s, lam, W3)
        for x in uni:
            assert member(x, d) == member_of_derived(x, s, lam), (x, s, lam)


def test_oracle_equivalence_sample():
    rng = random.Random(41)
    uni = helpers.finite_universe()
    for _ in range(30):
        s = helpers.random_bandset_u(rng, uni)
        lam = rng.randint(1, 3)
        s_enc = helpers.encode_bandset(s)
        for x in rng.sample(uni, 30):
            assert member_of_derived(x, s, lam) == \
                helpers.oracle_member_of_derived(x, s_enc, lam), (x, s, lam)


def test_dmap_law_for_ell():
    # l: ([1,w^w], I_2) -> ([0,w], I_1) commutes with the derived set:
    # preimage of d(A) equals d of the preimage
    rng = random.Random(43)
    theta, ltheta = WW, OMEGA
    pool = [ZERO, ONE, o("2"), o("3"), o("5"), OMEGA]
    for _ in range(60):
        bands = []
        for _ in range(rng.randint(1, 2)):
            lo, hi = sorted(rng.sample(pool, 2))
            cons = {}
            if rng.random() < 0.5:
                c = rng.choice([None, ZERO, ONE])
                d = rng.choice([None, ZERO, ONE])
                cons[1] = (c, d)
            bands.append(make_band(lo, hi, cons))
        a = bandset(bands)
        lhs = helpers.ell_preimage(derived_set(a, 1, ltheta), theta)
        rhs = derived_set(helpers.ell_preimage(a, theta), 2, theta)
        assert sets_equal(lhs, rhs, theta), a
