"""Adaptive one-dimensional quadrature.

A Gauss-Kronrod (10, 21) pair on every subinterval, with all subintervals
that fail their share of the tolerance bisected together, so each refinement
round costs a single vectorized call of the integrand.  Integrands map an
array of abscissae of shape ``(n,)`` to values of shape ``(n,)`` or
``(n, d)``; vector-valued integrands share one mesh and the error test is
applied to the worst component.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import DomainError, QuadratureError

# Kronrod 21-point abscissae (non-negative half), odd positions are the
# 10-point Gauss nodes.
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208798750000,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(21)
GAUSS_WEIGHTS[1:10:2] = _WG
GAUSS_WEIGHTS[11:20:2] = _WG[::-1]


@dataclass(frozen=True)
class QuadratureSettings:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_subdivisions: int = 2000
    w_tail_mass: float = 1e-12
    inner_order: int = 48

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("abs_tol and rel_tol must be positive")
        if self.max_subdivisions < 10:
            raise DomainError("max_subdivisions must be at least 10")
        if not 0 < self.w_tail_mass <= 0.01:
            raise DomainError("w_tail_mass must lie in (0, 0.01]")
        if self.inner_order < 8:
            raise DomainError("inner_order must be at least 8")


DEFAULT_SETTINGS = QuadratureSettings()


@lru_cache(maxsize=32)
def gauss_legendre(n):
    """Gauss-Legendre nodes and weights on [-1, 1] (read-only arrays)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _gk_apply(f, a, b):
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * KRONROD_NODES[None, :]
    vals = np.asarray(f(nodes.ravel()), dtype=float)
    vals = vals.reshape(nodes.shape + vals.shape[1:])
    if not np.all(np.isfinite(vals)):
        raise QuadratureError("integrand returned non-finite values")
    wk = KRONROD_WEIGHTS.reshape((1, 21) + (1,) * (vals.ndim - 2))
    wg = GAUSS_WEIGHTS.reshape(wk.shape)
    hk = half.reshape((-1,) + (1,) * (vals.ndim - 2))
    kron = hk * np.sum(wk * vals, axis=1)
    gauss = hk * np.sum(wg * vals, axis=1)
    err = np.abs(kron - gauss)
    if err.ndim > 1:
        err = err.max(axis=tuple(range(1, err.ndim)))
    return kron, err


def _check_bounds(lo, hi):
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise DomainError("integration limits must be finite")
    if not lo < hi:
        raise DomainError(f"need lo < hi, got [{lo}, {hi}]")


def integrate(f, lo, hi, settings: QuadratureSettings = DEFAULT_SETTINGS, *, initial=None):
    """Integrate a vectorized ``f`` over ``[lo, hi]``.

    ``initial`` optionally gives the sorted edges of the starting mesh (it
    must begin at ``lo`` and end at ``hi``); breakpoints are passed this way
    by :func:`integrate_split`.  Returns ``(value, err_est)``.
    """
    lo, hi = float(lo), float(hi)
    _check_bounds(lo, hi)
    edges = np.array([lo, hi]) if initial is None else np.asarray(initial, dtype=float)
    a = edges[:-1].copy()
    b = edges[1:].copy()
    keep = b > a
    a, b = a[keep], b[keep]
    vals, errs = _gk_apply(f, a, b)
    span = hi - lo
    n_split = 0
    while True:
        total = vals.sum(axis=0)
        total_err = errs.sum()
        tol = max(settings.abs_tol, settings.rel_tol * float(np.max(np.abs(total))))
        if total_err <= tol:
            break
        # bisect every piece exceeding its length-proportional share
        share = 0.5 * tol * (b - a) / span
        bad = errs > share
        if not bad.any():
            bad = errs == errs.max()
        if n_split + bad.sum() > settings.max_subdivisions:
            raise QuadratureError(
                f"subdivision budget exhausted (err {total_err:.3e} > tol {tol:.3e})",
                value=total,
                err_est=total_err,
            )
        n_split += int(bad.sum())
        ba, bb = a[bad], b[bad]
        bm = 0.5 * (ba + bb)
        na = np.concatenate([ba, bm])
        nb = np.concatenate([bm, bb])
        nv, ne = _gk_apply(f, na, nb)
        good = ~bad
        a = np.concatenate([a[good], na])
        b = np.concatenate([b[good], nb])
        vals = np.concatenate([vals[good], nv])
        errs = np.concatenate([errs[good], ne])
    # fixed summation order: left to right
    order = np.argsort(a, kind="stable")
    total = vals[order].sum(axis=0)
    if np.ndim(total) == 0:
        total = float(total)
    return total, float(errs.sum())


def integrate_split(f, lo, hi, breakpoints=(), settings: QuadratureSettings = DEFAULT_SETTINGS):
    """Like :func:`integrate` with the integrand's kinks registered.

    Breakpoints outside ``(lo, hi)`` are ignored and duplicates merged.
    """
    lo, hi = float(lo), float(hi)
    _check_bounds(lo, hi)
    bp = np.asarray(list(breakpoints), dtype=float)
    bp = bp[(bp > lo) & (bp < hi)]
    edges = np.unique(np.concatenate([[lo], bp, [hi]]))
    # drop slivers that would only add cost
    tiny = 1e-14 * max(1.0, abs(lo), abs(hi))
    edges = edges[np.concatenate([[True], np.diff(edges) > tiny])]
    edges[-1] = hi
    if len(edges) < 2:
        edges = np.array([lo, hi])
    return integrate(f, lo, hi, settings, initial=edges)


def fixed_gauss(f, lo, hi, order=48):
    """Fixed-order Gauss-Legendre rule, vectorized over arrays of limits.

    ``f`` receives nodes with shape ``lo.shape + (order,)`` and must return
    the same shape.  Used for inner integrals whose integrand is a single
    smooth bump that the caller has already bracketed.
    """
    x, w = gauss_legendre(order)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = mid[..., None] + half[..., None] * x
    return half * np.sum(w * f(nodes), axis=-1)
