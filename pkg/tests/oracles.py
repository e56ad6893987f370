"""Brute-force reference computations, independent of scadci.metrics."""

import math

import numpy as np
from scipy import integrate, special, stats

from scadci.scad import interval_endpoints


def _covered(z, w, theta, s, cfg):
    lo, hi = interval_endpoints(theta + z, w, s, cfg)
    return (lo <= theta) & (theta <= hi)


def coverage_given_w(w, theta, s, cfg, z_lim=12.0, n_grid=6001):
    """P(theta in J | W = w), locating every switch of the indicator in z."""
    z = np.linspace(-z_lim, z_lim, n_grid)
    c = _covered(z, w, theta, s, cfg)
    edges = []
    for i in np.flatnonzero(c[1:] != c[:-1]):
        a, b = z[i], z[i + 1]
        ca = c[i]
        for _ in range(60):
            mid = 0.5 * (a + b)
            if _covered(np.array([mid]), w, theta, s, cfg)[0] == ca:
                a = mid
            else:
                b = mid
        edges.append(0.5 * (a + b))
    pts = np.concatenate([[-np.inf], edges, [np.inf]])
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (max(lo, -z_lim) + min(hi, z_lim))
        if _covered(np.array([mid]), w, theta, s, cfg)[0]:
            total += special.ndtr(hi) - special.ndtr(lo)
    return total


def w_density(w, m):
    return stats.chi.pdf(w * math.sqrt(m), m) * math.sqrt(m)


def coverage_bruteforce(theta, s, cfg, tail=1e-13):
    m = cfg.m
    lo = math.sqrt(stats.chi2.ppf(tail, m) / m)
    hi = math.sqrt(stats.chi2.isf(tail, m) / m)
    val, _ = integrate.quad(lambda w: coverage_given_w(w, theta, s, cfg) * w_density(w, m),
                            lo, hi, epsabs=1e-11, epsrel=1e-11, limit=200)
    return val


def sel_bruteforce(theta, s, cfg, tail=1e-13):
    """E(W s(|Theta_hat| / W)) / (t E W) by nested scipy quadrature."""
    m = cfg.m
    lo = math.sqrt(stats.chi2.ppf(tail, m) / m)
    hi = math.sqrt(stats.chi2.isf(tail, m) / m)
    ew = math.sqrt(2 / m) * math.exp(math.lgamma((m + 1) / 2) - math.lgamma(m / 2))

    def inner(w):
        # Theta_hat = theta + z; s(|theta+z|/w) differs from t only for |theta+z| < k w
        f = lambda y: (s(abs(y)) - cfg.t_m) * stats.norm.pdf(w * y - theta) * w
        pts = [0.0] + list(s.knots[1:-1]) + [-p for p in s.knots[1:-1]]
        val, _ = integrate.quad(f, -cfg.k, cfg.k, points=sorted(pts), epsabs=1e-12, limit=200)
        return w * (cfg.t_m + val)

    val, _ = integrate.quad(lambda w: inner(w) * w_density(w, m), lo, hi, epsabs=1e-11,
                            epsrel=1e-11, limit=200)
    return val / (cfg.t_m * ew)
