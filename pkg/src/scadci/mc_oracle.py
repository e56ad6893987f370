"""Monte Carlo estimates of coverage and scaled expected length.

Simulates the pivots directly: Theta_hat ~ N(theta, 1) and, independently,
W = sqrt(chi2_m / m), with sigma = 1.  Shares nothing with the quadrature
path except the interval construction itself.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import DomainError
from .scad import SplineHalfWidth, interval_endpoints, s_eval
from .stats_core import ProblemConfig

BLOCK_SIZE = 1 << 19
MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class McEstimate:
    coverage_est: float
    coverage_se: float
    sel_est: float
    sel_se: float
    n_samples: int
    seed: int
    theta: float

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def block_rng(seed, block):
    """Independent Philox stream for one sample block."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def sample_w(rng, m, size):
    """Draws of W = sqrt(chi2_m / m)."""
    if m <= 10:
        z = rng.standard_normal((size, m))
        chi2 = np.einsum("ij,ij->i", z, z)
    else:
        chi2 = 2.0 * rng.standard_gamma(0.5 * m, size)
    return np.sqrt(chi2 / m)


def _combine(acc, n, mean, m2):
    # Chan et al. pairwise update of (count, mean, sum of squared deviations)
    n0, mean0, m20 = acc
    if n0 == 0:
        return n, mean, m2
    tot = n0 + n
    delta = mean - mean0
    return tot, mean0 + delta * n / tot, m20 + m2 + delta * delta * n0 * n / tot


def simulate(theta, s: SplineHalfWidth, cfg: ProblemConfig, n_samples=1_000_000, seed=0,
             block_size=BLOCK_SIZE):
    """Monte Carlo coverage and scaled expected length of J(s) at theta."""
    if n_samples < MIN_SAMPLES:
        raise DomainError(f"n_samples must be at least {MIN_SAMPLES}")
    theta = float(theta)
    scale = cfg.t_m * cfg.e_w
    cov_acc = (0, 0.0, 0.0)
    len_acc = (0, 0.0, 0.0)
    done = 0
    block = 0
    while done < n_samples:
        n = min(block_size, n_samples - done)
        rng = block_rng(seed, block)
        w = sample_w(rng, cfg.m, n)
        theta_hat = theta + rng.standard_normal(n)
        lower, upper = interval_endpoints(theta_hat, w, s, cfg)
        hit = ((lower <= theta) & (theta <= upper)).astype(float)
        half = w * s_eval(s, np.abs(theta_hat) / w) / scale
        cov_acc = _combine(cov_acc, n, hit.mean(), float(((hit - hit.mean()) ** 2).sum()))
        len_acc = _combine(len_acc, n, half.mean(), float(((half - half.mean()) ** 2).sum()))
        done += n
        block += 1
    n_tot = cov_acc[0]
    cov_se = np.sqrt(cov_acc[2] / (n_tot - 1) / n_tot)
    len_se = np.sqrt(len_acc[2] / (n_tot - 1) / n_tot)
    return McEstimate(
        coverage_est=float(cov_acc[1]),
        coverage_se=float(cov_se),
        sel_est=float(len_acc[1]),
        sel_se=float(len_se),
        n_samples=int(n_tot),
        seed=int(seed),
        theta=theta,
    )
