"""Normal and Student-t helpers plus the law of W = sigma_hat / sigma.

W is distributed as sqrt(chi2_m / m) when sigma_hat^2 is the usual unbiased
variance estimator with m residual degrees of freedom.  Every gamma ratio is
evaluated in log space so that m = 200 (and far beyond) stays finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .exceptions import DomainError, SolverError, ValidationError

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

SCAD_A = 3.7


def normal_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x - _LOG_SQRT_2PI)
    return out if out.ndim else float(out)


def normal_cdf(x):
    """Standard normal distribution function (accurate in both tails)."""
    out = special.ndtr(np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def t_central_prob(t, m):
    """P(-t <= T <= t) for T ~ t_m, via the regularized incomplete beta."""
    t = float(t)
    if t <= 0.0:
        return 0.0
    return 1.0 - special.betainc(0.5 * m, 0.5, m / (m + t * t))


def t_quantile(m, alpha, xtol=1e-13):
    """Return t(m) with P(-t(m) <= T <= t(m)) = 1 - alpha for T ~ t_m."""
    if int(m) != m or m < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {m!r}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    target = 1.0 - alpha

    def excess(t):
        return t_central_prob(t, m) - target

    lo, hi = 0.0, 1.0
    for _ in range(200):
        if excess(hi) > 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise SolverError("could not bracket the t quantile", bracket=(lo, hi))
    try:
        root, info = brentq(excess, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps,
                            maxiter=500, full_output=True)
    except (RuntimeError, ValueError) as exc:
        raise SolverError(f"t quantile root solve failed: {exc}", bracket=(lo, hi)) from exc
    if not info.converged:
        raise SolverError("t quantile root solve did not converge", bracket=(lo, hi))
    return float(root)


def _log_w_norm(m):
    # log of 2 m^(m/2) / (Gamma(m/2) 2^(m/2))
    return math.log(2.0) + 0.5 * m * math.log(m) - special.gammaln(0.5 * m) - 0.5 * m * math.log(2.0)


def log_w_pdf(w, m):
    """Log density of W; -inf for w <= 0."""
    w = np.asarray(w, dtype=float)
    with np.errstate(divide="ignore"):
        out = _log_w_norm(m) + (m - 1) * np.log(w) - 0.5 * m * w * w
    out = np.where(w > 0, out, -np.inf)
    return out if out.ndim else float(out)


def w_pdf(w, m):
    """Density of W = sqrt(chi2_m / m)."""
    if np.any(np.asarray(w) <= 0):
        raise DomainError("w_pdf is defined for w > 0 only")
    out = np.exp(log_w_pdf(w, m))
    return out if np.ndim(out) else float(out)


def expected_w(m):
    """E(W) = sqrt(2/m) Gamma((m+1)/2) / Gamma(m/2)."""
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m!r}")
    return math.sqrt(2.0 / m) * math.exp(special.gammaln(0.5 * (m + 1)) - special.gammaln(0.5 * m))


def w_upper_bound(m, tail_mass):
    """Smallest w_hi with P(W > w_hi) <= tail_mass."""
    if not 0.0 < tail_mass <= 0.01:
        raise DomainError(f"tail_mass must lie in (0, 0.01], got {tail_mass!r}")
    # chi2_m / 2 ~ Gamma(m/2)
    g = special.gammainccinv(0.5 * m, tail_mass)
    return math.sqrt(2.0 * g / m)


def w_lower_bound(m, tail_mass):
    """Largest w_lo with P(W < w_lo) <= tail_mass."""
    if not 0.0 < tail_mass <= 0.01:
        raise DomainError(f"tail_mass must lie in (0, 0.01], got {tail_mass!r}")
    g = special.gammaincinv(0.5 * m, tail_mass)
    return math.sqrt(2.0 * g / m)


@dataclass(frozen=True)
class ProblemConfig:
    """One scalar problem instance.

    ``k`` and ``t_m`` are derived on access, so they can never disagree with
    ``(m, alpha, eta, a)``.
    """

    m: int
    eta: float
    alpha: float = 0.05
    a: float = SCAD_A

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValidationError(f"m must be a positive integer, got {self.m!r}", field="m")
        object.__setattr__(self, "m", int(self.m))
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha!r}", field="alpha")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ValidationError(f"eta must be positive, got {self.eta!r}", field="eta")
        if not self.a > 2:
            raise ValidationError(f"a must exceed 2, got {self.a!r}", field="a")

    @property
    def k(self):
        return self.a * self.eta

    @cached_property
    def t_m(self):
        return t_quantile(self.m, self.alpha)

    @cached_property
    def e_w(self):
        return expected_w(self.m)
