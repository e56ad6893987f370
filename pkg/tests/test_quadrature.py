import math

import numpy as np
import pytest

from scadci.exceptions import DomainError, QuadratureError
from scadci.quadrature import (
    GAUSS_WEIGHTS,
    KRONROD_NODES,
    KRONROD_WEIGHTS,
    QuadratureSettings,
    fixed_gauss,
    integrate,
    integrate_split,
)
from scadci.scad import scad_threshold
from scadci.stats_core import normal_cdf, normal_pdf, w_pdf, w_upper_bound


def test_kronrod_rule_exactness():
    gx, gw = np.polynomial.legendre.leggauss(10)
    assert np.allclose(KRONROD_NODES[1::2], np.sort(gx), atol=1e-15)
    assert np.allclose(GAUSS_WEIGHTS[1::2], gw, atol=1e-15)
    for d in range(32):
        exact = (1 - (-1) ** (d + 1)) / (d + 1)
        assert KRONROD_WEIGHTS @ KRONROD_NODES**d == pytest.approx(exact, abs=1e-14)


def test_constant():
    val, err = integrate(lambda x: np.ones_like(x), 0.0, 1.0)
    assert val == pytest.approx(1.0, abs=1e-15)
    assert err >= 0


def test_normal_mass():
    val, _ = integrate(normal_pdf, -6.0, 6.0)
    assert val == pytest.approx(1.0 - 2.0 * normal_cdf(-6.0), abs=1e-12)


def test_w_density_truncated():
    m = 3
    hi = w_upper_bound(m, 1e-12)
    val, _ = integrate(lambda w: w_pdf(np.maximum(w, 1e-300), m), 0.0, hi)
    assert val == pytest.approx(1.0, abs=1e-9)


def test_abs_with_breakpoint():
    val, _ = integrate_split(np.abs, -1.0, 1.0, [0.0])
    assert abs(val - 1.0) < 1e-14


def test_scad_threshold_piecewise_antiderivative():
    eta, a = 1.3, 3.7
    k = a * eta
    # hand antiderivative of each branch on [0, a eta]
    soft = 0.5 * eta**2
    blend_f = lambda x: ((a - 1) * x * x / 2 - a * eta * x) / (a - 2)
    exact = soft + blend_f(k) - blend_f(2 * eta)
    val, _ = integrate_split(lambda x: scad_threshold(x, eta, a), 0.0, k, [eta, 2 * eta])
    assert val == pytest.approx(exact, abs=1e-12)


def test_no_breakpoints_matches_integrate():
    f = lambda x: np.exp(-x) * np.cos(3 * x)
    assert integrate_split(f, 0, 4, [])[0] == integrate(f, 0, 4)[0]


def test_linearity_and_split_consistency():
    rng = np.random.default_rng(11)
    tol = 1e-9
    for _ in range(10):
        c = rng.normal(size=4)
        f = lambda x, c=c: np.sin(c[0] * x) + c[1] * x**2
        g = lambda x, c=c: np.exp(c[2] * x / 4) + np.cos(c[3] * x)
        alpha, beta = rng.normal(size=2)
        fg = integrate(lambda x: alpha * f(x) + beta * g(x), -2, 3)[0]
        sep = alpha * integrate(f, -2, 3)[0] + beta * integrate(g, -2, 3)[0]
        assert fg == pytest.approx(sep, abs=4 * tol * (1 + abs(fg)))
        split = integrate_split(f, -2, 3, sorted(rng.uniform(-2, 3, 3)))[0]
        assert split == pytest.approx(integrate(f, -2, 3)[0], abs=2 * tol * (1 + abs(split)))


def test_vector_valued():
    ks = np.array([1.0, 2.0, 3.0])
    val, _ = integrate(lambda x: np.cos(np.outer(x, ks)), 0.0, math.pi / 2)
    assert np.allclose(val, np.sin(ks * math.pi / 2) / ks, atol=1e-13)


def test_budget_exhaustion_reports_partial():
    s = QuadratureSettings(abs_tol=1e-15, rel_tol=1e-15, max_subdivisions=10)
    with pytest.raises(QuadratureError) as exc:
        integrate(lambda x: np.sqrt(np.abs(x - 0.3)), 0.0, 1.0, s)
    assert exc.value.value is not None and exc.value.err_est > 0


def test_bad_limits_and_settings():
    with pytest.raises(DomainError):
        integrate(np.sin, 1.0, 0.0)
    with pytest.raises(DomainError):
        integrate(np.sin, 0.0, np.inf)
    with pytest.raises(DomainError):
        QuadratureSettings(abs_tol=0.0)
    with pytest.raises(DomainError):
        QuadratureSettings(max_subdivisions=5)


def test_fixed_gauss_vectorized():
    lo = np.array([0.0, 1.0, -2.0])
    hi = np.array([1.0, 3.0, 2.0])
    val = fixed_gauss(lambda x: x**5, lo, hi, 16)
    assert np.allclose(val, (hi**6 - lo**6) / 6, atol=1e-13)
