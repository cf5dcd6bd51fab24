"""Ordinal arithmetic, interval topologies, and polymodal countermodels."""

from .ordinal import (
    Ordinal,
    ZERO,
    ONE,
    OMEGA,
    OrdinalError,
    Underflow,
    DepthExceeded,
    ZeroArgument,
    OutOfRange,
    NotationSupport,
    normalize,
    compare,
    add,
    left_subtract,
    multiply,
    omega_pow,
    e,
    e_iter,
    ell,
    big_l,
    ell_iter,
    pounds,
    is_add_indec,
    is_mult_indec,
    CharSeqParams,
    char_seq,
    parse_ordinal,
    ordinal_to_text,
)
