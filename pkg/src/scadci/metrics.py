"""Scaled expected length and coverage probability of J(s).

Both functionals are nested integrals: an outer integral over the
standardized estimate x in [-k, k] and an inner integral over w = W.  The
inner integrands are all of the form

    w^p exp(-(A w^2 - 2 x theta w + theta^2) / 2),   A = x^2 + m,

which is log-concave in w with a closed-form mode, so the inner integral is
done with a fixed Gauss-Legendre rule on a window around that mode (tail
loss below 1e-15 of the peak).  The outer integral is adaptive with every
kink of the integrand registered as a breakpoint.  Functions taking
``theta`` accept scalars or 1-d arrays; array evaluation shares one outer
mesh across all thetas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .quadrature import DEFAULT_SETTINGS, QuadratureSettings, fixed_gauss, integrate_split
from .scad import SplineHalfWidth, s_eval, scad_threshold
from .stats_core import (
    ProblemConfig,
    _log_w_norm,
    normal_cdf,
    w_lower_bound,
    w_upper_bound,
)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# half-width of the inner window in units of the local Gaussian scale
_WINDOW_SIGMAS = 8.5
# below this |theta| the theta = 0 closed form is used
THETA_ZERO_SNAP = 1e-8
# theta blocks evaluated per outer mesh (bounds peak memory)
_THETA_BLOCK = 48


@dataclass(frozen=True)
class ThetaGrid:
    points: np.ndarray
    theta_max: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or len(pts) == 0:
            raise ValueError("theta grid must be a non-empty 1-d array")
        if np.any(pts < 0) or np.any(np.diff(pts) <= 0):
            raise ValueError("theta grid must be nonnegative and strictly increasing")
        if pts[0] != 0.0:
            raise ValueError("theta grid must contain 0")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, theta_max, step):
        n = int(math.floor(theta_max / step + 1e-9))
        pts = step * np.arange(n + 1)
        if pts[-1] < theta_max - 1e-12:
            pts = np.append(pts, theta_max)
        return cls(pts, float(theta_max))

    def __len__(self):
        return len(self.points)


def scan_horizon(cfg: ProblemConfig, extra=8.0):
    """theta beyond which J(s) behaves as the usual interval to within noise."""
    return cfg.k + cfg.t_m + extra


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def sel_weight_theta0(x, m):
    """Integral of phi(w x) w^2 f_W(w) over w > 0, in closed form."""
    x = np.asarray(x, dtype=float)
    out = np.exp((0.5 * m + 1.0) * (math.log(m) - np.log(x * x + m)) - _LOG_SQRT_2PI)
    return out if out.ndim else float(out)


def cov_weight_theta0(x, m):
    """Integral of phi(w x) w f_W(w) over w > 0, in closed form."""
    x = np.asarray(x, dtype=float)
    r = x * x + m
    logc = special.gammaln(0.5 * (m + 1)) - special.gammaln(0.5 * m) - 0.5 * math.log(math.pi)
    out = np.exp(logc + 0.5 * m * (math.log(m) - np.log(r)) - 0.5 * np.log(r))
    return out if out.ndim else float(out)


def b_func(w, theta, cfg: ProblemConfig):
    """Normal mass of [-t w, t w] intersected with [-k w - theta, k w - theta]."""
    w = np.asarray(w, dtype=float)
    t, k = cfg.t_m, cfg.k
    upper = np.minimum(t * w, k * w - theta)
    lower = np.maximum(-t * w, -k * w - theta)
    out = np.where(lower >= upper, 0.0, normal_cdf(upper) - normal_cdf(lower))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# inner integrals over w
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _w_support(m, tail_mass):
    return w_lower_bound(m, tail_mass), w_upper_bound(m, tail_mass)


def _bump_integral(x, theta, power, m, lo, hi, settings):
    """Integral over w in [lo, hi] of phi(w x - theta) w^(power+1) f_W(w).

    ``x``, ``theta``, ``lo`` and ``hi`` broadcast together; ``power`` is 0
    for coverage and 1 for length.  Limits outside the support of W are
    clipped to it.
    """
    x, theta, lo, hi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, theta, lo, hi)))
    p = m + power
    A = x * x + m
    mu = x * theta / A
    mode = 0.5 * (mu + np.sqrt(mu * mu + 4.0 * p / A))
    left = mode - _WINDOW_SIGMAS / np.sqrt(p / (mode * mode) + A)
    right = mode + _WINDOW_SIGMAS / np.sqrt(A)
    wa, wb = _w_support(m, settings.w_tail_mass)
    a = np.maximum.reduce([lo, left, np.full_like(lo, wa)])
    b = np.minimum.reduce([hi, right, np.full_like(hi, wb)])
    live = b > a
    out = np.zeros(x.shape)
    if not live.any():
        return out
    xl, tl = x[live], theta[live]
    const = _log_w_norm(m) - _LOG_SQRT_2PI - 0.5 * tl * tl

    def integrand(w):
        xx = xl[:, None]
        tt = tl[:, None]
        return np.exp(const[:, None] + p * np.log(w) - 0.5 * (xx * xx + m) * w * w + xx * tt * w)

    out[live] = fixed_gauss(integrand, a[live], b[live], settings.inner_order)
    return out


def length_kernel(x, theta, m, settings: QuadratureSettings = DEFAULT_SETTINGS):
    """Integral of phi(w x - theta) w^2 f_W(w) over w > 0."""
    x = np.asarray(x, dtype=float)
    out = _bump_integral(x, theta, 1, m, 0.0, np.inf, settings)
    return out if out.ndim else float(out)


def _w_limits(hm, hp, theta):
    """w-range on which h(x) - s <= theta / w <= h(x) + s, for theta != 0.

    Returns ``(lo, hi)`` with ``lo >= hi`` encoding an empty set.
    """
    hm, hp, theta = np.broadcast_arrays(hm, hp, theta)
    lo = np.zeros(hm.shape)
    hi = np.full(hm.shape, np.inf)
    pos = theta > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        # theta > 0 (subcases a, b, c)
        lo = np.where(pos & (hp > 0), theta / hp, lo)
        hi = np.where(pos & (hm > 0), theta / hm, hi)
        lo = np.where(pos & (hp <= 0), np.inf, lo)
        # theta < 0: mirror image
        neg = ~pos
        lo = np.where(neg & (hm < 0), theta / hm, lo)
        hi = np.where(neg & (hp < 0), theta / hp, hi)
        lo = np.where(neg & (hm >= 0), np.inf, lo)
    return lo, hi


def cp_inner(x, theta, s: SplineHalfWidth, cfg: ProblemConfig,
             settings: QuadratureSettings = DEFAULT_SETTINGS):
    """Inner w-integral of the coverage formula at a single x.

    Integral over w > 0 of I(h(x) - s(|x|) <= theta/w <= h(x) + s(|x|))
    phi(w x - theta) w f_W(w).
    """
    out = _cp_inner_grid(np.atleast_1d(np.asarray(x, dtype=float)),
                         np.atleast_1d(np.asarray(theta, dtype=float)), s, cfg, settings)
    if np.ndim(x) == 0 and np.ndim(theta) == 0:
        return float(out[0, 0])
    return out


def _hm_hp(x, s, cfg):
    hx = scad_threshold(x, cfg.eta, cfg.a)
    sx = s_eval(s, np.abs(x))
    return np.asarray(hx - sx), np.asarray(hx + sx)


def _cp_inner_grid(x, theta, s, cfg, settings):
    """cp_inner on the outer product ``x`` (n,) times ``theta`` (d,)."""
    hm, hp = _hm_hp(x, s, cfg)
    out = np.zeros((len(x), len(theta)))
    zero = np.abs(theta) < THETA_ZERO_SNAP
    if zero.any():
        covered = (hm <= 0) & (hp >= 0)
        out[:, zero] = np.where(covered, cov_weight_theta0(x, cfg.m), 0.0)[:, None]
    if (~zero).any():
        th = theta[~zero][None, :]
        lo, hi = _w_limits(hm[:, None], hp[:, None], th)
        out[:, ~zero] = _bump_integral(x[:, None], th, 0, cfg.m, lo, hi, settings)
    return out


# ---------------------------------------------------------------------------
# breakpoints
# ---------------------------------------------------------------------------

def _h_poly_pieces(cfg):
    """(start, end, coefficients in x) of h on [0, k]."""
    eta, a, k = cfg.eta, cfg.a, cfg.k
    pieces = [(0.0, eta, [0.0]), (eta, 2 * eta, [-eta, 1.0]),
              (2 * eta, a * eta, [-a * eta / (a - 2), (a - 1) / (a - 2)])]
    return [(max(lo, 0.0), min(hi, k), c) for lo, hi, c in pieces if lo < k]


def crossing_points(s: SplineHalfWidth, cfg: ProblemConfig):
    """Points x in (0, k) where h(x) = s(x), i.e. where h - s changes sign."""
    from numpy.polynomial import Polynomial

    polys = s.piece_polynomials()
    knots = s.knots
    roots = []
    for lo, hi, hc in _h_poly_pieces(cfg):
        edges = np.unique(np.concatenate([[lo, hi], knots[(knots > lo) & (knots < hi)]]))
        for p0, p1 in zip(edges[:-1], edges[1:]):
            if p1 - p0 <= 0:
                continue
            idx = min(int(np.searchsorted(knots, 0.5 * (p0 + p1), side="right")) - 1, len(polys) - 1)
            d = Polynomial(hc) - polys[idx]
            coef = np.trim_zeros(d.coef, "b")
            if len(coef) < 2:
                continue
            for r in Polynomial(coef).roots():
                if abs(r.imag) <= 1e-9 * max(1.0, abs(r.real)) and p0 < r.real < p1:
                    roots.append(float(r.real))
    return np.array(sorted(roots))


def _outer_breakpoints(s, cfg, with_crossings=True):
    eta, k = cfg.eta, cfg.k
    pos = [eta, 2 * eta, *s.knots[1:-1]]
    if with_crossings:
        pos.extend(crossing_points(s, cfg))
    pos = np.array([p for p in pos if 0 < p < k])
    return np.concatenate([-pos, [0.0], pos])


# ---------------------------------------------------------------------------
# scaled expected length
# ---------------------------------------------------------------------------

def _theta_blocks(theta):
    for start in range(0, len(theta), _THETA_BLOCK):
        yield slice(start, start + _THETA_BLOCK)


def sel(theta, s: SplineHalfWidth, cfg: ProblemConfig,
        settings: QuadratureSettings = DEFAULT_SETTINGS):
    """Scaled expected length e(theta; s) by the double-integral formula."""
    scalar = np.ndim(theta) == 0
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    t, k, m = cfg.t_m, cfg.k, cfg.m
    bps = _outer_breakpoints(s, cfg, with_crossings=False)
    out = np.empty(len(th))
    for blk in _theta_blocks(th):
        tb = th[blk]

        def integrand(x, tb=tb):
            diff = s_eval(s, np.abs(x)) - t
            kern = _bump_integral(x[:, None], tb[None, :], 1, m, 0.0, np.inf, settings)
            return diff[:, None] * kern

        val, _ = integrate_split(integrand, -k, k, bps, settings)
        out[blk] = 1.0 + np.atleast_1d(val) / (t * cfg.e_w)
    return float(out[0]) if scalar else out


def sel_at_zero(s: SplineHalfWidth, cfg: ProblemConfig,
                settings: QuadratureSettings = DEFAULT_SETTINGS):
    """e(0; s) from the single-integral closed-weight form."""
    t, m = cfg.t_m, cfg.m

    def integrand(x):
        return (s_eval(s, x) - t) * sel_weight_theta0(x, m)

    val, _ = integrate_split(integrand, 0.0, cfg.k, s.knots[1:-1], settings)
    return 1.0 + 2.0 * val / (t * cfg.e_w)


def max_sel(s: SplineHalfWidth, cfg: ProblemConfig,
            settings: QuadratureSettings = DEFAULT_SETTINGS, grid: ThetaGrid | None = None,
            theta_tol=1e-6):
    """Maximum of e(theta; s) over theta >= 0 and its location.

    Grid scan followed by golden-section refinement on the cells either side
    of the best grid point.
    """
    if grid is None:
        grid = ThetaGrid.uniform(scan_horizon(cfg), 0.05)
    pts = grid.points
    vals = sel(pts, s, cfg, settings)
    i = int(np.argmax(vals))
    lo = pts[max(i - 1, 0)]
    hi = pts[min(i + 1, len(pts) - 1)]
    x, fx = golden_section(lambda th: -sel(th, s, cfg, settings), lo, hi, theta_tol)
    if -fx >= vals[i]:
        return float(-fx), float(x)
    return float(vals[i]), float(pts[i])


def golden_section(f, lo, hi, tol=1e-6):
    """Minimize a unimodal f on [lo, hi]; returns (argmin, min)."""
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    if b - a <= tol:
        x = 0.5 * (a + b)
        return x, f(x)
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


# ---------------------------------------------------------------------------
# coverage probability
# ---------------------------------------------------------------------------

def _b_breakpoints(theta, cfg):
    t, k = cfg.t_m, cfg.k
    cands = [theta / (k + t), -theta / (k + t)]
    if k != t:
        cands += [theta / (k - t), -theta / (k - t)]
    return [c for c in cands if c > 0]


@lru_cache(maxsize=4096)
def _usual_term_cached(theta, m, alpha, eta, a, settings):
    cfg = ProblemConfig(m=m, alpha=alpha, eta=eta, a=a)
    wa, wb = _w_support(m, settings.w_tail_mass)

    def integrand(w):
        return b_func(w, theta, cfg) * np.exp(_log_w_norm(m) + (m - 1) * np.log(w) - 0.5 * m * w * w)

    val, _ = integrate_split(integrand, wa, wb, _b_breakpoints(theta, cfg), settings)
    return float(val)


def usual_term(theta, cfg: ProblemConfig, settings: QuadratureSettings = DEFAULT_SETTINGS):
    """P(usual interval covers and |beta_hat| <= k sigma_hat): the b(w) integral.

    Independent of s, so it is cached.
    """
    return _usual_term_cached(float(theta), cfg.m, cfg.alpha, cfg.eta, cfg.a, settings)


def _sj_term(theta, s, cfg, settings):
    """Integral over x in [-k, k] of cp_inner, for a 1-d array of thetas."""
    k = cfg.k
    out = np.empty(len(theta))
    zero = np.abs(theta) < THETA_ZERO_SNAP
    bps = _outer_breakpoints(s, cfg)
    if zero.any():
        def integrand0(x):
            hm, hp = _hm_hp(x, s, cfg)
            return np.where((hm <= 0) & (hp >= 0), cov_weight_theta0(x, cfg.m), 0.0)

        val0, _ = integrate_split(integrand0, -k, k, bps, settings)
        out[zero] = val0
    rest = np.flatnonzero(~zero)
    for blk in _theta_blocks(rest):
        idx = rest[blk]
        tb = theta[idx]

        def integrand(x, tb=tb):
            return _cp_inner_grid(x, tb, s, cfg, settings)

        val, _ = integrate_split(integrand, -k, k, bps, settings)
        out[idx] = val
    return out


def coverage(theta, s: SplineHalfWidth, cfg: ProblemConfig,
             settings: QuadratureSettings = DEFAULT_SETTINGS, *, signed=False):
    """Coverage probability of J(s) at theta = beta_i / sigma.

    Coverage is even in theta, so by default ``|theta|`` is evaluated;
    ``signed=True`` evaluates the formula at the signed value instead (used
    to check that evenness numerically).
    """
    scalar = np.ndim(theta) == 0
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if not signed:
        th = np.abs(th)
    sj = _sj_term(th, s, cfg, settings)
    usual = np.array([usual_term(v, cfg, settings) for v in th])
    out = sj + (1.0 - cfg.alpha) - usual
    return float(out[0]) if scalar else out
