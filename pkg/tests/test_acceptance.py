"""Acceptance criteria, each at its stated tolerance, one PASS/FAIL line apiece.

Reference numbers below are the published optimized values of e(0; s*) and
max e(theta; s*) for 1 - alpha = 0.95, a = 3.7.
"""

import time

import numpy as np
import pytest

from scadci.mc_oracle import simulate
from scadci.metrics import coverage, scan_horizon, sel, sel_at_zero
from scadci.scad import constant_spline, interval_endpoints, s_eval, scad_threshold, spline_fit
from scadci.stats_core import ProblemConfig

ETAS = (0.5, 1.0, 2.0)
QS = (4, 5, 6)
# (e(0; s*), max e(theta; s*)) keyed by (eta, q)
PUBLISHED = {
    200: {
        (0.5, 4): (1.1609, 1.1609), (0.5, 5): (1.1274, 1.1274), (0.5, 6): (1.1250, 1.1250),
        (1.0, 4): (1.2940, 1.3936), (1.0, 5): (1.2826, 1.3821), (1.0, 6): (1.2825, 1.3748),
        (2.0, 4): (1.2181, 2.1045), (2.0, 5): (1.2155, 5.5869), (2.0, 6): (1.2154, 5.5272),
    },
    3: {
        (0.5, 4): (1.0526, 1.0759), (0.5, 5): (1.0519, 1.0782), (0.5, 6): (1.0511, 1.0796),
        (1.0, 4): (1.0977, 1.3216), (1.0, 5): (1.0966, 1.3385), (1.0, 6): (1.0950, 1.3464),
        (2.0, 4): (1.0824, 2.0858), (2.0, 5): (1.0815, 2.1650), (2.0, 6): (1.0788, 2.1193),
    },
}
E0_TOL = 0.005
MAX_SEL_REL = 0.15
CELL_SECONDS = 600.0
LEVEL = 0.95

pytestmark = pytest.mark.slow


def _cell_lines(cells, m):
    lines, ok = [], True
    for eta in ETAS:
        for q in QS:
            result, error, seconds = cells.get(m, eta, q)
            ref_e0, ref_max = PUBLISHED[m][(eta, q)]
            if result is None:
                ok = False
                lines.append(f"  m={m} eta={eta:g} q={q}: FAILED ({error})")
                continue
            good = abs(result.objective - ref_e0) <= E0_TOL and seconds <= CELL_SECONDS
            ok &= good
            loose = abs(result.max_sel / ref_max - 1) <= MAX_SEL_REL
            lines.append(
                f"  m={m} eta={eta:g} q={q}: e0={result.objective:.4f} (published {ref_e0:.4f}, "
                f"diff {result.objective - ref_e0:+.4f}) max_sel={result.max_sel:.4f} "
                f"(published {ref_max:.4f}{'' if loose else ', outside 15%'}) "
                f"{seconds:.0f}s {'ok' if good else 'MISS'}")
    return ok, lines


@pytest.mark.parametrize("criterion, m", [(1, 200), (2, 3)])
def test_table_reproduction(cells, report, criterion, m):
    ok, lines = _cell_lines(cells, m)
    print("\n".join(lines))
    misses = sum("MISS" in ln or "FAILED" in ln for ln in lines)
    report(criterion, ok, f"m={m}: {len(lines) - misses}/{len(lines)} cells within +-{E0_TOL} "
                          f"and {CELL_SECONDS:.0f}s")
    assert ok, "\n".join(lines)


def test_no_cell_reaches_unit_length(cells, report):
    worst = np.inf
    for m in (200, 3):
        for eta in ETAS:
            for q in QS:
                result, _, _ = cells.get(m, eta, q)
                assert result is not None, (m, eta, q)
                worst = min(worst, result.objective)
    report(3, worst > 1.0, f"smallest e(0;s*) over 18 cells = {worst:.4f}")
    assert worst > 1.0


def test_knot_monotonicity(cells, report):
    problems = []
    for m in (200, 3):
        for eta in ETAS:
            e = [cells.get(m, eta, q)[0].objective for q in QS]
            if not (e[0] >= e[1] - 1e-3 and e[1] >= e[2] - 1e-3):
                problems.append(f"m={m} eta={eta:g} not non-increasing: {np.round(e, 4)}")
            if not e[1] - e[2] < 0.01:
                problems.append(f"m={m} eta={eta:g} q5->q6 drop {e[1] - e[2]:.4f} >= 0.01")
    report(4, not problems, "; ".join(problems) or "all six (m, eta) sequences")
    assert not problems


def _admissible_splines(cells):
    rng = np.random.default_rng(2024)
    out = []
    for m in (200, 3):
        for eta in ETAS:
            cfg = ProblemConfig(m=m, eta=eta)
            for q in QS:
                result, _, _ = cells.get(m, eta, q)
                if result is not None:
                    out.append(("s*", cfg, result.s_star))
            for _ in range(3):
                vals = cfg.t_m + rng.uniform(0.0, 1.5, 5)
                out.append(("random", cfg, spline_fit(vals, cfg, 6)))
            for width in (0.5, 1.0):
                out.append((f"t+{width:g}", cfg, spline_fit(np.full(5, cfg.t_m + width), cfg, 6)))
    return out


def test_limits(cells, report):
    worst_sel = worst_cov = 0.0
    where = ""
    for kind, cfg, s in _admissible_splines(cells):
        theta = scan_horizon(cfg, 10.0)
        ds = abs(float(sel(theta, s, cfg)) - 1.0)
        dc = abs(float(coverage(theta, s, cfg)) - LEVEL)
        if max(ds, dc) > max(worst_sel, worst_cov):
            where = f"{kind} m={cfg.m} eta={cfg.eta:g}"
        worst_sel, worst_cov = max(worst_sel, ds), max(worst_cov, dc)
    ok = worst_sel < 1e-5 and worst_cov < 1e-5
    report(5, ok, f"max |sel-1| = {worst_sel:.2e}, max |cov-0.95| = {worst_cov:.2e} "
                  f"at theta = k+t+10 (worst: {where})")
    assert ok


def test_identity_suite(report):
    problems = []
    for m in (3, 200):
        for eta in ETAS:
            cfg = ProblemConfig(m=m, eta=eta)
            s = constant_spline(cfg.t_m, cfg, 6)
            vals = sel(np.array([0.0, 0.5, 1.0, 5.0]), s, cfg)
            if np.max(np.abs(vals - 1.0)) > 1e-8:
                problems.append(f"sel != 1 for s=t, m={m} eta={eta:g}")
            for b in (2 * eta, cfg.a * eta):
                jump = abs(scad_threshold(np.nextafter(b, 0), eta) - scad_threshold(np.nextafter(b, np.inf), eta))
                if jump > 1e-12:
                    problems.append(f"h jumps by {jump:.1e} at {b}")
            shaped = spline_fit(cfg.t_m + np.array([1.0, 0.6, 0.2, -0.1, 0.3]), cfg, 6)
            sigma = np.array([0.3, 1.0, 4.0])
            for ratio in (cfg.k, cfg.k + 0.01, 3 * cfg.k):
                for sign in (1.0, -1.0):
                    beta = sign * ratio * sigma
                    lo, hi = interval_endpoints(beta, sigma, shaped, cfg)
                    if not (np.allclose(lo, beta - cfg.t_m * sigma, rtol=0, atol=1e-12)
                            and np.allclose(hi, beta + cfg.t_m * sigma, rtol=0, atol=1e-12)):
                        problems.append(f"J differs from I at ratio {ratio}")
    report(6, not problems, "; ".join(problems) or "sel(s=t)=1, h continuous, J=I beyond k")
    assert not problems


def test_eq1_eq2_cross_check(report):
    worst = 0.0
    rng = np.random.default_rng(7)
    for m in (3, 200):
        for eta in ETAS:
            cfg = ProblemConfig(m=m, eta=eta)
            for _ in range(20):
                q = int(rng.integers(3, 8))
                s = spline_fit(cfg.t_m + rng.uniform(-0.8, 1.5, q - 1), cfg, q)
                worst = max(worst, abs(float(sel(0.0, s, cfg)) - sel_at_zero(s, cfg)))
    report(7, worst < 1e-7, f"max |sel(0,s) - sel_at_zero(s)| = {worst:.2e} over 120 splines")
    assert worst < 1e-7


def _battery():
    cases = []
    shapes = {0.5: [0.5, 0.8, 0.6, 0.3, 0.1], 2.0: [0.9, 1.4, 1.1, 0.6, 0.2]}
    thetas = {3: (0.0, 0.5, 2.0, None, 1.3), 200: (0.0, 0.5, 2.0, None, 3.1)}
    picks = [(3, 0.5, 0), (3, 0.5, 3), (3, 2.0, 1), (3, 2.0, 2), (3, 2.0, 4),
             (200, 0.5, 1), (200, 0.5, 2), (200, 2.0, 0), (200, 2.0, 3), (200, 2.0, 4)]
    for m, eta, i in picks:
        cfg = ProblemConfig(m=m, eta=eta)
        s = spline_fit(cfg.t_m + np.array(shapes[eta]), cfg, 6)
        th = thetas[m][i]
        cases.append((cfg, s, scan_horizon(cfg, 10.0) if th is None else th))
    return cases


def test_monte_carlo_battery(report):
    start = time.perf_counter()
    worst = 0.0
    lines = []
    for j, (cfg, s, theta) in enumerate(_battery()):
        est = simulate(theta, s, cfg, n_samples=4_000_000, seed=100 + j)
        zc = (est.coverage_est - float(coverage(theta, s, cfg))) / est.coverage_se
        zs = (est.sel_est - float(sel(theta, s, cfg))) / est.sel_se
        worst = max(worst, abs(zc), abs(zs))
        lines.append(f"  m={cfg.m} eta={cfg.eta:g} theta={theta:.3g}: z_cov={zc:+.2f} z_sel={zs:+.2f}")
    seconds = time.perf_counter() - start
    print("\n".join(lines))
    ok = worst <= 3.0 and seconds <= 300
    report(8, ok, f"10 cases, max |z| = {worst:.2f}, {seconds:.0f}s")
    assert ok, "\n".join(lines)


def test_coverage_verification(cells, report):
    worst, where = np.inf, None
    for m in (200, 3):
        for eta in ETAS:
            for q in QS:
                result, _, _ = cells.get(m, eta, q)
                assert result is not None, (m, eta, q)
                if result.min_coverage < worst:
                    worst, where = result.min_coverage, (m, eta, q, result.argmin_theta)
    ok = worst >= LEVEL - 1e-5
    report(9, ok, f"min post-hoc coverage {worst:.7f} at m={where[0]} eta={where[1]:g} q={where[2]} "
                  f"theta={where[3]:.4f}")
    assert ok


def test_figure_reproduction(cells, report):
    result, error, _ = cells.get(200, 1.0, 6)
    assert result is not None, error
    s = result.s_star
    cfg = s.cfg
    early = coverage(np.linspace(0.0, 1.0, 101), s, cfg)
    ref = PUBLISHED[200][(1.0, 6)][1]
    checks = {
        "coverage > 0.96 on [0,1]": float(early.max()) > 0.96,
        f"max sel within {E0_TOL} of {ref}": abs(result.max_sel - ref) <= E0_TOL,
        "s*(k) = t(200)": float(s_eval(s, cfg.k)) == cfg.t_m and abs(s(cfg.k) - cfg.t_m) < 1e-12,
    }
    ok = all(checks.values())
    report(10, ok, f"max coverage on [0,1] = {early.max():.4f}, max sel = {result.max_sel:.4f} at "
                   f"theta = {result.argmax_theta:.3f}; "
                   + ", ".join(f"{k}: {'yes' if v else 'no'}" for k, v in checks.items()))
    assert ok
