"""Minimize e(0; s) over the free spline values under coverage constraints.

The spline is linear in its knot values, so the objective e(0; s) and the
positivity constraints are affine maps of the free values and get exact
gradients.  Coverage constraints on a finite theta grid are the only
nonlinear part; their Jacobian is taken by forward differences over the
deterministic quadrature.  Each start is solved with SLSQP, then the full
theta range is scanned and any violation found is added to the grid
(cutting-plane rounds).
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .exceptions import InfeasibleError
from .metrics import (
    ThetaGrid,
    coverage,
    golden_section,
    max_sel,
    scan_horizon,
    sel_at_zero,
)
from .quadrature import DEFAULT_SETTINGS, QuadratureSettings
from .scad import SplineHalfWidth, knot_grid, s_eval, spline_fit
from .stats_core import ProblemConfig

logger = logging.getLogger(__name__)

POSITIVITY_FLOOR = 1e-3
VERIFICATION_SLACK = 1e-5
CUT_OFFSETS = (-0.03, -0.01, 0.0, 0.01, 0.03)


def default_constraint_grid(cfg: ProblemConfig):
    """0 to 2 in steps of 0.05, then steps of 0.1 out to k + t(m) + 4."""
    fine = 0.05 * np.arange(41)
    top = cfg.k + cfg.t_m + 4.0
    n = int(math.ceil((top - 2.0) / 0.1 - 1e-9))
    coarse = 2.0 + 0.1 * np.arange(1, n + 1)
    pts = np.unique(np.round(np.concatenate([fine, coarse]), 12))
    return ThetaGrid(pts, float(pts[-1]))


def default_scan_grid(cfg: ProblemConfig, step=0.05):
    return ThetaGrid.uniform(scan_horizon(cfg), step)


@dataclass
class OptimizationProblem:
    cfg: ProblemConfig
    q: int = 6
    constraint_grid: ThetaGrid | None = None
    positivity_grid: np.ndarray | None = None
    solver_tol: float = 1e-7
    max_iters: int = 150
    multistart: int = 4
    seed: int = 0
    settings: QuadratureSettings = DEFAULT_SETTINGS
    cut_rounds: int = 5
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.q < 3:
            raise ValueError("q must be at least 3")
        if self.constraint_grid is None:
            self.constraint_grid = default_constraint_grid(self.cfg)
        if self.positivity_grid is None:
            self.positivity_grid = np.linspace(0.0, self.cfg.k, 200)
        pts = self.constraint_grid.points
        if pts[0] != 0.0:
            raise ValueError("constraint grid must contain 0")
        if self.multistart < 1:
            raise ValueError("multistart must be at least 1")


@dataclass
class OptimizationResult:
    s_star: SplineHalfWidth
    objective: float
    max_sel: float
    argmax_theta: float
    min_coverage: float
    argmin_theta: float
    iterations: int
    converged: bool
    solver_trace: list = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self):
        return {
            "spline": self.s_star.to_dict(),
            "objective": self.objective,
            "max_sel": self.max_sel,
            "argmax_theta": self.argmax_theta,
            "min_coverage": self.min_coverage,
            "argmin_theta": self.argmin_theta,
            "iterations": self.iterations,
            "converged": self.converged,
            "wall_time": self.wall_time,
            "solver_trace": self.solver_trace,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def verify_coverage(s: SplineHalfWidth, cfg: ProblemConfig,
                    settings: QuadratureSettings = DEFAULT_SETTINGS,
                    scan: ThetaGrid | None = None, theta_tol=1e-6):
    """Minimum coverage over theta >= 0: grid scan plus golden-section polish."""
    if scan is None:
        scan = default_scan_grid(cfg)
    pts = scan.points
    vals = coverage(pts, s, cfg, settings)
    i = int(np.argmin(vals))
    best_theta, best = _polish_min(s, cfg, settings, pts, i, theta_tol)
    if best > vals[i]:
        return float(vals[i]), float(pts[i])
    return best, best_theta


def _polish_min(s, cfg, settings, pts, i, theta_tol):
    lo = pts[max(i - 1, 0)]
    hi = pts[min(i + 1, len(pts) - 1)]
    x, fx = golden_section(lambda th: coverage(th, s, cfg, settings), lo, hi, theta_tol)
    return float(x), float(fx)


def violations(s, cfg, settings, scan, level, theta_tol=1e-6):
    """Local coverage minima on the scan that fall below ``level``."""
    pts = scan.points
    vals = coverage(pts, s, cfg, settings)
    out = []
    for i in range(len(pts)):
        left = vals[i - 1] if i > 0 else np.inf
        right = vals[i + 1] if i + 1 < len(pts) else np.inf
        if vals[i] <= left and vals[i] <= right and vals[i] < level + 1e-4:
            th, v = _polish_min(s, cfg, settings, pts, i, theta_tol)
            if min(v, vals[i]) < level:
                out.append((th if v <= vals[i] else float(pts[i]), min(v, vals[i])))
    return out


class _Model:
    """Objective and constraints of the NLP in the free knot values."""

    def __init__(self, problem: OptimizationProblem):
        self.p = problem
        cfg = problem.cfg
        self.cfg = cfg
        self.n = problem.q - 1
        self.level = 1.0 - cfg.alpha
        t = cfg.t_m
        base = np.full(self.n, t)
        self.obj0 = sel_at_zero(spline_fit(base, cfg, problem.q), cfg, problem.settings)
        eye = np.eye(self.n)
        self.obj_grad = np.array([
            sel_at_zero(spline_fit(base + eye[j], cfg, problem.q), cfg, problem.settings) - self.obj0
            for j in range(self.n)
        ])
        pos = problem.positivity_grid
        s0 = s_eval(spline_fit(base, cfg, problem.q), pos)
        self.pos0 = s0
        self.pos_jac = np.column_stack([
            s_eval(spline_fit(base + eye[j], cfg, problem.q), pos) - s0 for j in range(self.n)
        ])
        self.base = base
        self.grid = problem.constraint_grid.points.copy()
        self._cache_x = None
        self._cache_val = None
        self._cache_jx = None
        self._cache_jac = None
        self.n_cov_evals = 0
        self.best = None
        self.upper = t + max(6.0, 2.0 * cfg.eta + 2.0)

    def spline(self, x):
        return spline_fit(x, self.cfg, self.p.q)

    def objective(self, x):
        return float(self.obj0 + self.obj_grad @ (np.asarray(x) - self.base))

    def objective_grad(self, x):
        return self.obj_grad

    def cov(self, x):
        x = np.asarray(x, dtype=float)
        if self._cache_x is None or not np.array_equal(x, self._cache_x):
            self._cache_val = coverage(self.grid, self.spline(x), self.cfg, self.p.settings) - self.level
            self._cache_x = x.copy()
            self.n_cov_evals += 1
            self._record(x)
        return self._cache_val

    def _record(self, x):
        # SLSQP may wander off after touching the optimum; keep the best grid-feasible iterate
        if min(float(np.min(self._cache_val)), float(np.min(self.positivity(x)))) < -self.p.solver_tol:
            return
        obj = self.objective(x)
        if self.best is None or obj < self.best[0]:
            self.best = (obj, x.copy())

    def cov_jac(self, x):
        x = np.asarray(x, dtype=float)
        if self._cache_jx is not None and np.array_equal(x, self._cache_jx):
            return self._cache_jac
        f0 = self.cov(x)
        jac = np.empty((len(self.grid), self.n))
        for j in range(self.n):
            h = self.p.fd_step * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += h
            fp = coverage(self.grid, self.spline(xp), self.cfg, self.p.settings) - self.level
            jac[:, j] = (fp - f0) / h
        self.n_cov_evals += self.n
        self._cache_jx = x.copy()
        self._cache_jac = jac
        return jac

    def positivity(self, x):
        return self.pos0 + self.pos_jac @ (np.asarray(x) - self.base) - POSITIVITY_FLOOR

    def constraints(self):
        return [
            {"type": "ineq", "fun": self.cov, "jac": self.cov_jac},
            {"type": "ineq", "fun": self.positivity, "jac": lambda x: self.pos_jac},
        ]

    def add_theta(self, thetas):
        grid = np.unique(np.concatenate([self.grid, np.asarray(thetas, dtype=float)]))
        self.grid = grid
        self._cache_x = self._cache_jx = None
        self.best = None

    def max_violation(self, x):
        return max(0.0, -float(np.min(self.cov(x))), -float(np.min(self.positivity(x))))


def starting_points(problem: OptimizationProblem):
    """Multistart set: s = t(m) + 0.5 j for j = 0, 1, 2, then seeded draws around t(m) + eta.

    Infeasible starts are pulled toward a feasible constant anchor before solving.
    """
    cfg = problem.cfg
    t = cfg.t_m
    n = problem.q - 1
    starts = [np.full(n, t + 0.5 * j) for j in range(3)]
    rng = np.random.default_rng(problem.seed)
    while len(starts) < problem.multistart:
        starts.append(t + cfg.eta + rng.uniform(0.0, 1.0, n))
    return starts[: problem.multistart]


ANCHOR_WIDTHS = (1.0, 1.5, 2.0, 3.0, 4.0)


def _anchor(model: _Model, cfg):
    """First grid-feasible constant t(m) + c eta; the pinned spline can dip below t + eta near k."""
    for c in ANCHOR_WIDTHS:
        x = np.full(model.n, cfg.t_m + c * cfg.eta)
        if model.max_violation(x) <= model.p.solver_tol:
            return x
    return x


def _repair(model: _Model, x, anchor, steps=8):
    """Smallest blend toward the feasible anchor that is grid-feasible (bisection).

    SLSQP stalls when started outside the feasible set.
    """
    tol = model.p.solver_tol
    if model.max_violation(x) <= tol:
        return x
    if model.max_violation(anchor) > tol:
        return anchor.copy()
    lo, hi = 0.0, 1.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if model.max_violation(x + mid * (anchor - x)) <= tol:
            hi = mid
        else:
            lo = mid
    return x + hi * (anchor - x)


def _slsqp(model: _Model, x0, problem: OptimizationProblem):
    return minimize(
        model.objective,
        x0,
        jac=model.objective_grad,
        constraints=model.constraints(),
        method="SLSQP",
        bounds=[(POSITIVITY_FLOOR, model.upper)] * model.n,
        options={"maxiter": problem.max_iters, "ftol": problem.solver_tol * 1e-3},
    )


def _solve_from(model: _Model, x0, problem: OptimizationProblem, restarts=3):
    """SLSQP, restarted with a fresh Hessian after line-search failures.

    Finite-difference noise in the coverage Jacobian makes SLSQP stop with
    status 8 short of the optimum; a restart from the best feasible iterate
    usually resumes progress.
    """
    x = np.asarray(x0, dtype=float)
    nit = 0
    for _ in range(restarts + 1):
        before = model.best[0] if model.best is not None else np.inf
        res = minimize_result = _slsqp(model, x, problem)
        nit += int(res.nit)
        x = res.x
        if model.max_violation(x) > problem.solver_tol and model.best is not None:
            x = model.best[1]
        elif model.best is not None and model.best[0] < model.objective(x) - problem.solver_tol:
            x = model.best[1]
        after = model.best[0] if model.best is not None else np.inf
        if res.status != 8 or not after < before - problem.solver_tol:
            break
    minimize_result.nit = nit
    return minimize_result, x


def _run_start(problem: OptimizationProblem, x0, scan: ThetaGrid, trace: list, cuts=(),
               seen=None):
    """Cutting-plane rounds from one start.

    ``cuts`` are theta values found by earlier starts.  Returns None when the
    repaired start coincides with one already in ``seen``.
    """
    model = _Model(problem)
    if len(cuts):
        model.add_theta(cuts)
    level = model.level
    x = np.asarray(x0, dtype=float)
    iters = 0
    ok = False
    for rnd in range(problem.cut_rounds + 1):
        t_round = time.perf_counter()
        x = _repair(model, x, _anchor(model, problem.cfg))
        if rnd == 0 and seen is not None:
            if any(np.max(np.abs(x - y)) < 1e-6 for y in seen):
                trace.append({"round": 0, "start": [float(v) for v in x0], "skipped": True})
                return None
            seen.append(x.copy())
        res, x = _solve_from(model, x, problem)
        iters += int(res.nit)
        viol = model.max_violation(x)
        trace.append({"round": rnd, "start": [float(v) for v in x0], "status": int(res.status),
                      "message": str(res.message), "nit": int(res.nit),
                      "objective": model.objective(x), "grid_violation": viol,
                      "grid_size": len(model.grid),
                      "seconds": time.perf_counter() - t_round})
        if viol > problem.solver_tol:
            logger.info("start %s round %d: grid violation %.3g", x0, rnd, viol)
        bad = violations(model.spline(x), problem.cfg, problem.settings, scan,
                         level - 0.1 * VERIFICATION_SLACK)
        worst = min((v for _, v in bad), default=level)
        ok = viol <= problem.solver_tol and worst >= level - 0.5 * VERIFICATION_SLACK
        if not bad:
            break
        # dips sit between grid points and drift as s moves: cut with a small cluster
        model.add_theta([th + d for th, _ in bad for d in CUT_OFFSETS if th + d >= 0])
    return x, model, iters, ok


def optimize(problem: OptimizationProblem) -> OptimizationResult:
    """Best feasible spline across the multistarts (smallest e(0; s))."""
    t_start = time.perf_counter()
    cfg = problem.cfg
    settings = problem.settings
    scan = default_scan_grid(cfg)
    trace = []
    candidates = []
    fallback = None
    total_iters = 0
    base_grid = problem.constraint_grid.points
    cuts = np.empty(0)
    seen = []
    for x0 in starting_points(problem):
        out = _run_start(problem, x0, scan, trace, cuts, seen)
        if out is None:
            continue
        x, model, iters, ok = out
        cuts = np.setdiff1d(model.grid, base_grid)
        total_iters += iters
        viol = model.max_violation(x)
        if fallback is None or viol < fallback[1]:
            fallback = (x, viol)
        if ok:
            candidates.append((model.objective(x), x))
    if not candidates:
        raise InfeasibleError(
            "no feasible spline found from any start",
            best=[float(v) for v in fallback[0]],
            violations=float(fallback[1]),
        )
    best_obj = min(c[0] for c in candidates)
    ties = [c for c in candidates if c[0] <= best_obj + 1e-9]
    scored = []
    for obj, x in ties:
        s = spline_fit(x, cfg, problem.q)
        scored.append((max_sel(s, cfg, settings)[0], tuple(x), obj, s))
    scored.sort(key=lambda r: (r[0], r[1]))
    _, x_best, _, s_star = scored[0]
    objective = sel_at_zero(s_star, cfg, settings)
    ms, ms_theta = max_sel(s_star, cfg, settings)
    min_cov, min_theta = verify_coverage(s_star, cfg, settings, scan)
    converged = min_cov >= 1.0 - cfg.alpha - VERIFICATION_SLACK
    return OptimizationResult(
        s_star=s_star,
        objective=objective,
        max_sel=ms,
        argmax_theta=ms_theta,
        min_coverage=min_cov,
        argmin_theta=min_theta,
        iterations=total_iters,
        converged=converged,
        solver_trace=trace,
        wall_time=time.perf_counter() - t_start,
    )


__all__ = [
    "OptimizationProblem",
    "OptimizationResult",
    "default_constraint_grid",
    "default_scan_grid",
    "optimize",
    "verify_coverage",
    "knot_grid",
]
