"""SCAD thresholding, the data-scale SCAD estimator and the half-width spline.

The half-width function ``s`` is a natural cubic spline through equally
spaced knots on ``[0, k]`` whose last value is pinned to ``t(m)``; beyond
``k`` it is the constant ``t(m)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import solve_banded

from .exceptions import DomainError, ValidationError
from .stats_core import ProblemConfig

SPLINE_SCHEMA = "scadci.spline/1"


def scad_threshold(x, eta, a=3.7):
    """Standardized SCAD threshold function h.

    Soft-thresholds for ``|x| <= 2 eta``, blends linearly up to ``a eta`` and
    is the identity beyond.  Vectorized over ``x``.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    sgn = np.sign(x)
    soft = sgn * np.maximum(ax - eta, 0.0)
    blend = ((a - 1.0) * x - sgn * a * eta) / (a - 2.0)
    out = np.where(ax <= 2.0 * eta, soft, np.where(ax <= a * eta, blend, x))
    return out if out.ndim else float(out)


def scad_estimate(beta_hat, sigma_hat, cfg: ProblemConfig):
    """SCAD estimate of beta_i with lambda = sigma_hat * eta.

    Evaluated on the data scale so that the identity branch returns
    ``beta_hat`` unchanged.
    """
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    if np.any(sigma_hat <= 0):
        raise DomainError("sigma_hat must be positive")
    beta_hat = np.asarray(beta_hat, dtype=float)
    lam = sigma_hat * cfg.eta
    a = cfg.a
    ab = np.abs(beta_hat)
    sgn = np.sign(beta_hat)
    soft = sgn * np.maximum(ab - lam, 0.0)
    blend = ((a - 1.0) * beta_hat - sgn * a * lam) / (a - 2.0)
    out = np.where(ab <= 2.0 * lam, soft, np.where(ab <= a * lam, blend, beta_hat))
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class SplineHalfWidth:
    """Natural cubic spline on [0, k], constant t(m) beyond.

    ``coefficients[i]`` holds ``(c0, c1, c2, c3)`` of the cubic in the local
    coordinate ``x - knots[i]`` on ``[knots[i], knots[i+1]]``.
    """

    cfg: ProblemConfig
    knots: np.ndarray
    values: np.ndarray
    coefficients: np.ndarray

    @property
    def q(self):
        return len(self.knots)

    @property
    def k(self):
        return float(self.knots[-1])

    @property
    def t_m(self):
        return float(self.values[-1])

    @property
    def free_values(self):
        return self.values[:-1].copy()

    def __call__(self, x):
        return s_eval(self, x)

    def derivative(self, x, order=1):
        """Derivative of the spline piece containing x (zero beyond k)."""
        x = np.asarray(x, dtype=float)
        idx = _piece_index(self, x)
        dx = x - self.knots[idx]
        c = self.coefficients[idx]
        if order == 1:
            out = c[..., 1] + 2.0 * c[..., 2] * dx + 3.0 * c[..., 3] * dx * dx
        elif order == 2:
            out = 2.0 * c[..., 2] + 6.0 * c[..., 3] * dx
        elif order == 3:
            out = 6.0 * c[..., 3] + 0.0 * dx
        else:
            raise ValueError("order must be 1, 2 or 3")
        out = np.where(x >= self.k, 0.0, out)
        return out if out.ndim else float(out)

    def piece_polynomials(self):
        """The cubic on each knot interval as a Polynomial in global x."""
        polys = []
        for xi, c in zip(self.knots[:-1], self.coefficients):
            polys.append(Polynomial(c)(Polynomial([-xi, 1.0])))
        return polys

    def to_dict(self):
        return {
            "schema": SPLINE_SCHEMA,
            "m": self.cfg.m,
            "alpha": self.cfg.alpha,
            "eta": self.cfg.eta,
            "a": self.cfg.a,
            "q": self.q,
            "knot_values": [float(v) for v in self.values],
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def _piece_index(s, x):
    idx = np.searchsorted(s.knots, x, side="right") - 1
    return np.clip(idx, 0, s.q - 2)


def knot_grid(k, q):
    """q equally spaced knots from 0 to k inclusive."""
    knots = np.linspace(0.0, k, q)
    knots[-1] = k
    return knots


def _natural_second_derivatives(h, y):
    q = len(y)
    n = q - 2
    moments = np.zeros(q)
    if n == 0:
        return moments
    rhs = 6.0 * (y[2:] - 2.0 * y[1:-1] + y[:-2]) / (h * h)
    ab = np.zeros((3, n))
    ab[0, 1:] = 1.0
    ab[1, :] = 4.0
    ab[2, :-1] = 1.0
    moments[1:-1] = solve_banded((1, 1), ab, rhs)
    return moments


def spline_fit(knot_values, cfg: ProblemConfig, q=None) -> SplineHalfWidth:
    """Fit the natural cubic spline through ``knot_values`` and ``(k, t(m))``.

    ``knot_values`` are the q-1 free values s(x_1), ..., s(x_{q-1}).
    """
    v = np.asarray(knot_values, dtype=float).ravel()
    if q is None:
        q = len(v) + 1
    if q < 3:
        raise DomainError(f"need at least 3 knots, got q={q}")
    if len(v) != q - 1:
        raise DomainError(f"expected {q - 1} free knot values, got {len(v)}")
    if not np.all(np.isfinite(v)):
        raise DomainError("knot values must be finite")
    k = cfg.k
    knots = knot_grid(k, q)
    y = np.append(v, cfg.t_m)
    h = k / (q - 1)
    mom = _natural_second_derivatives(h, y)
    c0 = y[:-1]
    c1 = (y[1:] - y[:-1]) / h - h * (2.0 * mom[:-1] + mom[1:]) / 6.0
    c2 = mom[:-1] / 2.0
    c3 = (mom[1:] - mom[:-1]) / (6.0 * h)
    coefs = np.column_stack([c0, c1, c2, c3])
    for arr in (knots, y, coefs):
        arr.setflags(write=False)
    return SplineHalfWidth(cfg=cfg, knots=knots, values=y, coefficients=coefs)


def constant_spline(value, cfg: ProblemConfig, q) -> SplineHalfWidth:
    """Spline with every free knot value equal to ``value``."""
    return spline_fit(np.full(q - 1, float(value)), cfg, q)


def s_eval(s: SplineHalfWidth, x):
    """Evaluate s at x >= 0: the cubic on [0, k] and t(m) from k onwards."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("s is evaluated at |x| only; got a negative argument")
    idx = _piece_index(s, x)
    dx = x - s.knots[idx]
    c = s.coefficients[idx]
    inner = c[..., 0] + dx * (c[..., 1] + dx * (c[..., 2] + dx * c[..., 3]))
    out = np.where(x >= s.k, s.t_m, inner)
    return out if out.ndim else float(out)


def interval_endpoints(beta_hat, sigma_hat, s: SplineHalfWidth, cfg: ProblemConfig):
    """Endpoints of J(s) = [beta_tilde - sigma_hat s(.), beta_tilde + sigma_hat s(.)].

    Reverts to the usual t interval whenever |beta_hat| >= k sigma_hat.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    centre = scad_estimate(beta_hat, sigma_hat, cfg)
    ratio = np.abs(beta_hat) / sigma_hat
    usual = ratio >= cfg.k
    half = sigma_hat * s_eval(s, np.where(usual, cfg.k, ratio))
    centre = np.where(usual, beta_hat, centre)
    half = np.where(usual, cfg.t_m * sigma_hat, half)
    lower = centre - half
    upper = centre + half
    if lower.ndim == 0:
        return float(lower), float(upper)
    return lower, upper


def spline_from_dict(data, cfg: ProblemConfig | None = None) -> SplineHalfWidth:
    """Rebuild a spline from its JSON object, validating every field.

    When ``cfg`` is given, the stored (m, alpha, eta, a) must match it.
    """
    required = ("m", "alpha", "eta", "a", "q", "knot_values")
    for key in required:
        if key not in data:
            raise ValidationError(f"spline file is missing '{key}'", field=key)
    stored = ProblemConfig(m=data["m"], alpha=data["alpha"], eta=data["eta"], a=data["a"])
    if cfg is not None:
        for name in ("m", "alpha", "eta", "a"):
            if getattr(stored, name) != getattr(cfg, name):
                raise ValidationError(
                    f"spline {name}={getattr(stored, name)!r} does not match config "
                    f"{name}={getattr(cfg, name)!r}",
                    field=name,
                )
    else:
        cfg = stored
    q = int(data["q"])
    values = [float(v) for v in data["knot_values"]]
    if len(values) != q:
        raise ValidationError(f"expected {q} knot values, got {len(values)}", field="knot_values")
    if not all(math.isfinite(v) for v in values):
        raise ValidationError("knot values must be finite", field="knot_values")
    if abs(values[-1] - cfg.t_m) > 1e-12 * max(1.0, cfg.t_m):
        raise ValidationError(
            f"last knot value {values[-1]!r} is not t(m)={cfg.t_m!r}", field="knot_values"
        )
    return spline_fit(values[:-1], cfg, q)


def load_spline(path, cfg: ProblemConfig | None = None) -> SplineHalfWidth:
    with open(path) as fh:
        return spline_from_dict(json.load(fh), cfg)


def save_spline(s: SplineHalfWidth, path):
    with open(path, "w") as fh:
        fh.write(s.to_json(indent=2))
        fh.write("\n")
