"""Binary-share machinery: bit decomposition via a Sklansky parallel-prefix
adder over GMW AND gates, MSB/ReLU, and highest-set-bit extraction.

A shared ring value x = s0 + s1 mod 2^64 is decomposed by securely adding the
two parties' local bit strings: party 0 contributes XOR-shares (bits(s0), 0),
party 1 contributes (0, bits(s1)). Generate/propagate signals are combined in
log2(64) = 6 levels, each one batched AND round, so bit decomposition costs
7 rounds total.
"""

from __future__ import annotations

import numpy as np

from .protocols import and_bits, beaver_mult
from .ring import RING_BITS
from .runtime import PartyContext

_BIT_SHIFTS = np.arange(RING_BITS, dtype=np.uint64)


def _local_bits(share: np.ndarray) -> np.ndarray:
    """(..., 64) uint8 bits of this party's own ring share, LSB first."""
    s = np.asarray(share, dtype=np.uint64)
    return ((s[..., None] >> _BIT_SHIFTS) & np.uint64(1)).astype(np.uint8)


def _sklansky_pairs(level: int, width: int = RING_BITS):
    """Indices combined at one Sklansky level: i with bit `level` set takes
    the block-boundary partner j covering the lower half of its block."""
    idx = np.arange(width)
    i = idx[(idx >> level) & 1 == 1]
    j = ((i >> level) << level) - 1
    return i, j


def bit_decompose(ctx: PartyContext, x: np.ndarray) -> np.ndarray:
    """XOR-shared bits (..., 64) of the reconstructed value, LSB first."""
    x = np.asarray(x, dtype=np.uint64)
    own = _local_bits(x)
    zeros = np.zeros_like(own)
    a = own if ctx.party == 0 else zeros
    b = zeros if ctx.party == 0 else own
    p = own.copy()  # a ^ b == own bits for either party
    g = and_bits(ctx, a, b)
    p_orig = p.copy()
    for level in range(6):
        i, j = _sklansky_pairs(level)
        gi, pi = g[..., i], p[..., i]
        gj, pj = g[..., j], p[..., j]
        both = and_bits(ctx,
                        np.concatenate([pi, pi], axis=-1),
                        np.concatenate([gj, pj], axis=-1))
        half = i.size
        g[..., i] = gi ^ both[..., :half]
        p[..., i] = both[..., half:]
    out = p_orig.copy()
    out[..., 1:] ^= g[..., :-1]  # sum bit i = p_i xor carry_{i-1}
    return out


def msb(ctx: PartyContext, x: np.ndarray) -> np.ndarray:
    """XOR-shared sign bit of x."""
    return bit_decompose(ctx, x)[..., RING_BITS - 1]


def b2a(ctx: PartyContext, bits: np.ndarray) -> np.ndarray:
    """Convert XOR-shared bits to arithmetic shares of the same 0/1 values.

    b0 xor b1 = b0 + b1 - 2*b0*b1; the cross product is one Beaver multiply
    of the two parties' locally-held bits.
    """
    own = np.asarray(bits, dtype=np.uint64)
    zeros = np.zeros_like(own)
    x = own if ctx.party == 0 else zeros
    y = zeros if ctx.party == 0 else own
    prod = beaver_mult(ctx, x, y)
    return own - np.uint64(2) * prod


def relu(ctx: PartyContext, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shares of max(0, x) plus the arithmetic 0/1 derivative mask."""
    x = np.asarray(x, dtype=np.uint64)
    sign = msb(ctx, x)
    if ctx.party == 0:
        sign = sign ^ np.uint8(1)
    mask = b2a(ctx, sign)
    return beaver_mult(ctx, mask, x), mask


def prefix_or_high(ctx: PartyContext, bits: np.ndarray) -> np.ndarray:
    """por[i] = OR(bits[i..63]), XOR-shared; Sklansky over reversed order."""
    v = np.ascontiguousarray(bits[..., ::-1], dtype=np.uint8)
    for level in range(6):
        i, j = _sklansky_pairs(level)
        # OR(x, y) = x ^ y ^ (x & y)
        prod = and_bits(ctx, v[..., i], v[..., j])
        v[..., i] = v[..., i] ^ v[..., j] ^ prod
    return np.ascontiguousarray(v[..., ::-1])


def highest_one_hot(ctx: PartyContext, x: np.ndarray) -> np.ndarray:
    """Arithmetic shares of the (..., 64) one-hot marking the highest set bit
    of x; the all-zero vector iff x = 0."""
    bits = bit_decompose(ctx, x)
    por = prefix_or_high(ctx, bits)
    onehot = por.copy()
    onehot[..., :-1] ^= por[..., 1:]
    return b2a(ctx, onehot)
