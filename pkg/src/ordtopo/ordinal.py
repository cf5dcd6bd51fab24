"""Cantor normal form arithmetic for ordinals below epsilon_0.

An ordinal is represented as a finite sum  w^e1*c1 + ... + w^ek*ck  with
strictly decreasing exponents (themselves ordinals) and positive integer
coefficients.  The empty sum is 0.  The representation is unique, so
structural equality is ordinal equality.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import total_ordering
from typing import Iterable, Optional, Tuple

# Nesting cap for fuzzing safety; omega_pow and the parser enforce it.
DEPTH_CAP = 64


class OrdinalError(Exception):
    pass


class Underflow(OrdinalError):
    """left_subtract(a, b) with a > b."""


class DepthExceeded(OrdinalError):
    """CNF nesting depth went past the configured cap."""


class ZeroArgument(OrdinalError):
    """Logarithm of 0."""


class OutOfRange(OrdinalError):
    """Index outside the declared range (e.g. char_seq)."""


class NotationSupport(OrdinalError):
    """Operation would need an ordinal >= epsilon_0."""


class OrdinalSyntaxError(OrdinalError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


@total_ordering
class Ordinal:
    """Immutable CNF term.  Use normalize()/parse_ordinal() to build safely."""

    __slots__ = ("terms", "depth", "_hash")

    def __init__(self, terms: Tuple[Tuple["Ordinal", int], ...] = ()):
        # terms must already be in canonical order; normalize() is the
        # checked entry point for raw data.
        self.terms = terms
        self.depth = 0 if not terms else 1 + max(e.depth for e, _ in terms)
        self._hash = None

    @classmethod
    def from_int(cls, n: int) -> "Ordinal":
        if n < 0:
            raise ValueError("ordinals are non-negative")
        if n == 0:
            return ZERO
        return cls(((ZERO, n),))

    def is_zero(self) -> bool:
        return not self.terms

    def is_finite(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and self.terms[0][0].is_zero())

    def is_limit(self) -> bool:
        return bool(self.terms) and not self.terms[-1][0].is_zero()

    def is_successor(self) -> bool:
        return bool(self.terms) and self.terms[-1][0].is_zero()

    def to_int(self) -> int:
        if self.is_zero():
            return 0
        if not self.is_finite():
            raise ValueError(f"{self} is infinite")
        return self.terms[0][1]

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            other = Ordinal.from_int(other)
        if not isinstance(other, Ordinal):
            return NotImplemented
        return self.terms == other.terms

    def __lt__(self, other) -> bool:
        if isinstance(other, int):
            other = Ordinal.from_int(other)
        if not isinstance(other, Ordinal):
            return NotImplemented
        return compare(self, other) < 0

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.terms)
        return self._hash

    def __add__(self, other):
        if isinstance(other, int):
            other = Ordinal.from_int(other)
        return add(self, other)

    def __radd__(self, other):
        return add(Ordinal.from_int(other), self)

    def __mul__(self, other):
        if isinstance(other, int):
            other = Ordinal.from_int(other)
        return multiply(self, other)

    def __rmul__(self, other):
        return multiply(Ordinal.from_int(other), self)

    def __str__(self) -> str:
        return ordinal_to_text(self)

    def __repr__(self) -> str:
        return f"Ordinal<{ordinal_to_text(self)}>"


ZERO = Ordinal()
ONE = Ordinal(((ZERO, 1),))
OMEGA = Ordinal(((ONE, 1),))


def compare(a: Ordinal, b: Ordinal) -> int:
    """-1, 0, or 1; lexicographic on CNF terms."""
    for (ea, ca), (eb, cb) in zip(a.terms, b.terms):
        c = compare(ea, eb)
        if c:
            return c
        if ca != cb:
            return -1 if ca < cb else 1
    if len(a.terms) != len(b.terms):
        return -1 if len(a.terms) < len(b.terms) else 1
    return 0


def add(a: Ordinal, b: Ordinal) -> Ordinal:
    if b.is_zero():
        return a
    if a.is_zero():
        return b
    e0, c0 = b.terms[0]
    out = []
    merged = False
    for e, c in a.terms:
        cmp = compare(e, e0)
        if cmp > 0:
            out.append((e, c))
        elif cmp == 0:
            out.append((e0, c + c0))
            merged = True
            break
        else:
            break
    if merged:
        out.extend(b.terms[1:])
    else:
        out.extend(b.terms)
    return Ordinal(tuple(out))


def left_subtract(a: Ordinal, b: Ordinal) -> Ordinal:
    """The unique g with a + g = b; Underflow when a > b."""
    if a.is_zero():
        return b
    i = 0
    while i < len(a.terms) and i < len(b.terms) and a.terms[i] == b.terms[i]:
        i += 1
    if i == len(a.terms):
        return Ordinal(b.terms[i:])
    if i == len(b.terms):
        raise Underflow(f"{a} > {b}")
    (ea, ca), (eb, cb) = a.terms[i], b.terms[i]
    cmp = compare(ea, eb)
    if cmp < 0:
        return Ordinal(b.terms[i:])
    if cmp == 0 and ca < cb:
        return Ordinal(((eb, cb - ca),) + b.terms[i + 1:])
    raise Underflow(f"{a} > {b}")


def multiply(a: Ordinal, b: Ordinal) -> Ordinal:
    if a.is_zero() or b.is_zero():
        return ZERO
    e0, c0 = a.terms[0]
    out = []
    for f, d in b.terms:
        if not f.is_zero():
            out.append((add(e0, f), d))
        else:
            # finite part of b is always the last term
            out.append((e0, c0 * d))
            out.extend(a.terms[1:])
    return Ordinal(tuple(out))


def omega_pow(a: Ordinal) -> Ordinal:
    if a.depth + 1 > DEPTH_CAP:
        raise DepthExceeded(f"nesting past {DEPTH_CAP}")
    return Ordinal(((a, 1),))


def normalize(raw_terms: Iterable[Tuple[Ordinal, int]]) -> Ordinal:
    """Fold an arbitrary term sequence into canonical CNF (as an ordered sum)."""
    acc = ZERO
    for e, c in raw_terms:
        if c < 0:
            raise ValueError("coefficients must be non-negative")
        if c:
            acc = add(acc, multiply(omega_pow(e), Ordinal.from_int(c)))
    return acc


def e(a: Ordinal) -> Ordinal:
    """-1 + w^a."""
    if a.is_zero():
        return ZERO
    return omega_pow(a)  # w^a is a limit, the -1 is absorbed


def e_iter(n: int, a: Ordinal) -> Ordinal:
    for _ in range(n):
        a = e(a)
    return a


def ell(a: Ordinal) -> Ordinal:
    """End-logarithm: last CNF exponent."""
    if a.is_zero():
        raise ZeroArgument("ell(0)")
    return a.terms[-1][0]


def big_l(a: Ordinal) -> Ordinal:
    """Initial logarithm: first CNF exponent."""
    if a.is_zero():
        raise ZeroArgument("L(0)")
    return a.terms[0][0]


def ell_iter(xi: Ordinal, a: Ordinal) -> Ordinal:
    """Iterated end-logarithm l^xi.

    ell strictly decreases positive ordinals, so the orbit hits 0 after
    finitely many steps; every transfinite xi therefore yields 0 and the
    evaluation below is exact for all xi.
    """
    if xi.is_zero():
        return a
    steps = xi.to_int() if xi.is_finite() else None
    n = 0
    while not a.is_zero() and (steps is None or n < steps):
        a = ell(a)
        n += 1
    return a


def pounds(a: Ordinal) -> Ordinal:
    """Write a = w*(1+a0)+k and return a0; 0 whenever a <= w."""
    quot_terms = tuple(
        (left_subtract(ONE, e_), c) for e_, c in a.terms if not e_.is_zero()
    )
    quot = Ordinal(quot_terms)
    if quot.is_zero():
        return ZERO
    return left_subtract(ONE, quot)


def is_add_indec(a: Ordinal) -> bool:
    return len(a.terms) == 1 and a.terms[0][1] == 1


def is_mult_indec(a: Ordinal) -> bool:
    if a == ONE:
        return True
    return (
        is_add_indec(a)
        and is_add_indec(a.terms[0][0])
        and not a.terms[0][0].is_zero()
    )


@dataclass(frozen=True)
class CharSeqParams:
    varsigma: Ordinal
    nu: Ordinal

    def __post_init__(self):
        v = self.varsigma
        if v == ONE:
            return
        if not (v.is_limit() and is_mult_indec(v)):
            raise ValueError("varsigma must be 1 or of the form w^(w^r)")


def char_seq(params: CharSeqParams, iota: Ordinal) -> Ordinal:
    """The iota-th entry of the characteristic sequence for varsigma."""
    if params.varsigma == ONE:
        # constant-0 sequence indexed by iota < w; the range check is
        # deliberately relaxed here since every entry is 0 anyway
        return ZERO
    if compare(iota, params.varsigma) >= 0:
        raise OutOfRange(f"{iota} >= {params.varsigma}")
    fin = 0
    quot_terms = []
    for e_, c in iota.terms:
        if e_.is_zero():
            fin = c
        else:
            quot_terms.append((left_subtract(ONE, e_), c))
    iota0 = Ordinal(tuple(quot_terms))
    return add(multiply(params.nu, iota0), Ordinal.from_int(fin))


# --- textual syntax ---------------------------------------------------------
#
#   sum     := product ('+' product)*
#   product := atom ('*' nat)?
#   atom    := nat | 'w' ('^' atom)? | '(' sum ')'
#
# Parsing normalizes, printing emits canonical CNF.  Exponents that are not
# a plain natural or 'w' are printed parenthesized so the round trip is exact.


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            raise OrdinalSyntaxError(f"expected {ch!r}", self.pos)
        self.pos += 1

    def nat(self) -> int:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            raise OrdinalSyntaxError("expected a natural number", start)
        return int(self.text[start:self.pos])

    def atom(self) -> Ordinal:
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            v = self.sum()
            self.expect(")")
            return v
        if ch == "w":
            self.pos += 1
            if self.peek() == "^":
                self.pos += 1
                return omega_pow(self.atom())
            return OMEGA
        if ch.isdigit():
            return Ordinal.from_int(self.nat())
        raise OrdinalSyntaxError("expected '0'-'9', 'w' or '('", self.pos)

    def product(self) -> Ordinal:
        v = self.atom()
        if self.peek() == "*":
            self.pos += 1
            v = multiply(v, Ordinal.from_int(self.nat()))
        return v

    def sum(self) -> Ordinal:
        v = self.product()
        while self.peek() == "+":
            self.pos += 1
            v = add(v, self.product())
        return v

    def parse(self) -> Ordinal:
        v = self.sum()
        self.skip_ws()
        if self.pos != len(self.text):
            raise OrdinalSyntaxError("trailing input", self.pos)
        return v


def parse_ordinal(text: str) -> Ordinal:
    return _Parser(text).parse()


def ordinal_to_text(a: Ordinal) -> str:
    if a.is_zero():
        return "0"
    parts = []
    for e_, c in a.terms:
        if e_.is_zero():
            parts.append(str(c))
            continue
        if e_ == ONE:
            s = "w"
        elif e_.is_finite() or e_ == OMEGA:
            s = f"w^{ordinal_to_text(e_)}"
        else:
            s = f"w^({ordinal_to_text(e_)})"
        if c > 1:
            s += f"*{c}"
        parts.append(s)
    return "+".join(parts)
