"""Secure sparse matrix multiplication from the factor decomposition.

The graph owner (party 0) holds the DecompositionBundle; the other party only
learns (m, n, t, d), so transcript sizes are independent of the topology.
One call is an 8-round pipeline: five oblivious permutations, two oblivious
selection-multiplication batches (the Gamma selectors), and one private
multiplication by the weight diagonal, interleaved with local prefix-sum /
difference steps. Fixed-point inputs truncate exactly once, at the weight
step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decompose import (DecompositionBundle, apply_Sigma, apply_Sigma_T,
                        apply_delta, apply_delta_T)
from .protocols import op, osm, priv_mult
from .ring import encode_fixed
from .runtime import PartyContext


@dataclass(frozen=True)
class SmmDims:
    """Public shape of one smm call; all party 1 ever learns about A."""

    m: int
    n: int
    t: int


def _clog(k: int) -> int:
    return math.ceil(math.log2(k)) if k > 1 else 0


def smm_online_bits(m: int, n: int, t: int, d: int, L: int = 64) -> int:
    """Online payload of one smm call in bits."""
    return ((5 * t + 2 * m + 2 * n) * L
            + 3 * t * _clog(t) + m * _clog(m) + n * _clog(n)
            + m + n) * d


def smm_offline_bits(m: int, n: int, t: int, d: int, L: int = 64) -> int:
    """Dealer correction bits for one smm call."""
    return 2 * (2 * t + m + n) * d * L


def beaver_dense_online_bits(m: int, n: int, d: int, L: int = 64) -> int:
    """Online payload of the dense Beaver baseline for an m*n by n*d product:
    both parties open masked copies of both operands."""
    return 2 * (m * n + n * d) * L


def beaver_dense_offline_bits(m: int, n: int, d: int, L: int = 64) -> int:
    return m * d * L


def _resize(v: np.ndarray, out_len: int) -> np.ndarray:
    out = np.zeros((out_len,) + v.shape[1:], dtype=v.dtype)
    keep = min(len(v), out_len)
    out[:keep] = v[:keep]
    return out


def _lam_ring(bundle: DecompositionBundle, fixed_point: bool, cfg) -> np.ndarray:
    if fixed_point:
        return encode_fixed(bundle.lam, cfg)
    return np.asarray(np.round(bundle.lam), dtype=np.int64).astype(np.uint64)


def _selectors(count: int, keep: int) -> np.ndarray:
    return (np.arange(count) < keep).astype(np.uint64)


def _osm_rows(ctx, sel: np.ndarray | None, y: np.ndarray) -> np.ndarray:
    """Row selectors broadcast over the d columns: one OSM instance per cell."""
    s = None if sel is None else np.broadcast_to(sel[:, None], y.shape)
    return osm(ctx, s, y)


def smm(ctx: PartyContext, bundle: DecompositionBundle | None, dims: SmmDims,
        x: np.ndarray, shared: bool = True, fixed_point: bool = False) -> np.ndarray:
    """Shares of A @ X for X of shape (n, d); X is party 1's plaintext when
    shared=False, otherwise additively shared between the parties.
    """
    m, n, t = dims.m, dims.n, dims.t
    p0 = ctx.party == 0
    x = np.asarray(x, dtype=np.uint64).reshape(n, -1)
    d = x.shape[1]
    if p0 and (bundle.m, bundle.n, bundle.t) != (m, n, t):
        raise ValueError("bundle does not match declared dims")
    y = op(ctx, bundle.sigma1 if p0 else None, x if (shared or not p0) else None,
           n, d, shared)
    y = apply_delta(y)
    y = _osm_rows(ctx, _selectors(n, bundle.ncol) if p0 else None, y)
    y = _resize(y, t)
    y = op(ctx, bundle.sigma2 if p0 else None, y, t, d, True)
    y = apply_Sigma(y)
    y = op(ctx, bundle.sigma3 if p0 else None, y, t, d, True)
    y = priv_mult(ctx, _lam_ring(bundle, fixed_point, ctx.cfg) if p0 else None,
                  y, truncate=fixed_point)
    y = apply_Sigma_T(y)
    y = op(ctx, bundle.sigma4 if p0 else None, y, t, d, True)
    y = _resize(y, m)
    y = _osm_rows(ctx, _selectors(m, bundle.nrow) if p0 else None, y)
    y = apply_delta_T(y)
    return op(ctx, bundle.sigma5 if p0 else None, y, m, d, True)


def smm_transpose(ctx: PartyContext, bundle: DecompositionBundle | None,
                  dims: SmmDims, g: np.ndarray, shared: bool = True,
                  fixed_point: bool = False) -> np.ndarray:
    """Shares of A.T @ G for G of shape (m, d), reusing the forward bundle:
    the transposed factor sequence needs no re-decomposition and consumes
    tapes of exactly the same shapes as the forward call.
    """
    m, n, t = dims.m, dims.n, dims.t
    p0 = ctx.party == 0
    g = np.asarray(g, dtype=np.uint64).reshape(m, -1)
    d = g.shape[1]
    inv = (lambda s: s.inverse()) if p0 else (lambda s: None)
    y = op(ctx, inv(bundle.sigma5) if p0 else None,
           g if (shared or not p0) else None, m, d, shared)
    y = apply_delta(y)
    y = _osm_rows(ctx, _selectors(m, bundle.nrow) if p0 else None, y)
    y = _resize(y, t)
    y = op(ctx, inv(bundle.sigma4) if p0 else None, y, t, d, True)
    y = apply_Sigma(y)
    y = priv_mult(ctx, _lam_ring(bundle, fixed_point, ctx.cfg) if p0 else None,
                  y, truncate=fixed_point)
    y = op(ctx, inv(bundle.sigma3) if p0 else None, y, t, d, True)
    y = apply_Sigma_T(y)
    y = op(ctx, inv(bundle.sigma2) if p0 else None, y, t, d, True)
    y = _resize(y, n)
    y = _osm_rows(ctx, _selectors(n, bundle.ncol) if p0 else None, y)
    y = apply_delta_T(y)
    return op(ctx, inv(bundle.sigma1) if p0 else None, y, n, d, True)


def smm_left(ctx: PartyContext, bundle: DecompositionBundle | None,
             dims: SmmDims, x: np.ndarray, shared: bool = True,
             fixed_point: bool = False) -> np.ndarray:
    """Shares of X @ A for X of shape (d, m): the reversed factor sequence
    acting on rows, realized through the transpose identity X A = (A.T X.T).T.
    """
    x = np.asarray(x, dtype=np.uint64)
    out = smm_transpose(ctx, bundle, dims, x.T, shared=shared,
                        fixed_point=fixed_point)
    return np.ascontiguousarray(out.T)
