"""Command-line front end: eval, optimize, table, figure, mc-check.

Every run is a deterministic function of its configuration (and seed), so CSV
and JSON outputs are byte-identical across re-runs.  Wall-clock timings are
written to stderr and to separate ``*_timings.csv`` files for that reason.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .exceptions import DomainError, InfeasibleError, ScadCIError, ValidationError
from .mc_oracle import MIN_SAMPLES, simulate
from .metrics import ThetaGrid, coverage, scan_horizon, sel
from .optimizer import OptimizationProblem, optimize
from .quadrature import QuadratureSettings
from .scad import load_spline, s_eval, save_spline
from .stats_core import SCAD_A, ProblemConfig

logger = logging.getLogger("scadci")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_MC_DISAGREE = 4

SCHEMA_VERSION = 1
MC_Z_LIMIT = 4.0
TABLE_M = {1: 200, 2: 3}
TABLE_ETAS = (0.5, 1.0, 2.0)
TABLE_QS = (4, 5, 6)


@dataclass(frozen=True)
class RunConfig:
    m: int = 200
    alpha: float = 0.05
    eta: float = 1.0
    a: float = SCAD_A
    q: int = 6
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    w_tail_mass: float = 1e-12
    theta_step: float = 0.05
    theta_max: float | None = None
    multistart: int = 4
    seed: int = 0
    max_iters: int = 150
    cut_rounds: int = 5
    solver_tol: float = 1e-7
    out_dir: str = "."

    def problem_config(self) -> ProblemConfig:
        return ProblemConfig(m=self.m, eta=self.eta, alpha=self.alpha, a=self.a)

    def settings(self) -> QuadratureSettings:
        return QuadratureSettings(abs_tol=self.abs_tol, rel_tol=self.rel_tol,
                                  w_tail_mass=self.w_tail_mass)

    def problem(self) -> OptimizationProblem:
        return OptimizationProblem(self.problem_config(), q=self.q, multistart=self.multistart,
                                   seed=self.seed, settings=self.settings(),
                                   max_iters=self.max_iters, cut_rounds=self.cut_rounds,
                                   solver_tol=self.solver_tol)

    def theta_grid(self) -> ThetaGrid:
        top = self.theta_max if self.theta_max is not None else scan_horizon(self.problem_config())
        return ThetaGrid.uniform(top, self.theta_step)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, raw):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            value = float(raw)
            if not value.is_integer():
                raise ValueError
            return int(value)
        if kind == "str":
            return str(raw)
        if str(raw).lower() in ("none", ""):
            if "None" in kind:
                return None
            raise ValueError
        return float(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"bad value for {key}: {raw!r}", field=key) from None


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; '#' comments; unknown keys are rejected."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ValidationError(f"cannot parse config file {path}: {exc}", field="config") from None
    out = {}
    for key, raw in parser.items("run"):
        if key not in _FIELD_TYPES:
            raise ValidationError(f"unknown config key {key!r}", field=key)
        out[key] = _coerce(key, raw)
    return out


def build_config(args) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for key in _FIELD_TYPES:
        raw = getattr(args, key, None)
        if raw is not None:
            values[key] = _coerce(key, raw)
    cfg = RunConfig(**values)
    # surface ProblemConfig / QuadratureSettings validation up front
    cfg.problem_config()
    cfg.settings()
    if cfg.theta_step <= 0 or not math.isfinite(cfg.theta_step):
        raise ValidationError("theta_step must be positive", field="theta_step")
    if cfg.q < 3:
        raise ValidationError("q must be at least 3", field="q")
    if cfg.multistart < 1:
        raise ValidationError("multistart must be at least 1", field="multistart")
    return cfg


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "nan" if not math.isfinite(x) else f"{float(x):.6g}"
    return str(x)


def write_csv(kind, header, rows, path=None, stream=None):
    """CSV with a leading ``# schema: scadci.<kind>/<version>`` line, 6 significant digits."""
    buf = io.StringIO()
    buf.write(f"# schema: scadci.{kind}/{SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    if stream is not None:
        stream.write(text)
    return text


def _parse_thetas(text):
    if text is None:
        return None
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"bad theta list {text!r}", field="theta") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise ValidationError("theta list must be non-empty and finite", field="theta")
    return np.array(vals)


def _load_matching_spline(path, cfg: RunConfig):
    s = load_spline(path, cfg.problem_config())
    if s.q != cfg.q:
        raise ValidationError(f"spline has q={s.q} but config has q={cfg.q}", field="q")
    return s


def _out(cfg, name):
    return Path(cfg.out_dir) / name


def _result_dict(result):
    d = result.to_dict()
    d.pop("wall_time", None)
    return d


def _cell_stem(cfg: RunConfig):
    return f"m{cfg.m}_eta{cfg.eta:g}_q{cfg.q}"


# subcommands


def cmd_eval(cfg: RunConfig, args):
    s = _load_matching_spline(args.spline, cfg)
    thetas = _parse_thetas(args.theta)
    if thetas is None:
        thetas = cfg.theta_grid().points
    pc, st = cfg.problem_config(), cfg.settings()
    cov = coverage(thetas, s, pc, st, signed=True)
    length = sel(thetas, s, pc, st)
    rows = list(zip(thetas, cov, length))
    write_csv("eval", ["theta", "coverage", "sel"], rows, args.output,
              None if args.output else sys.stdout)
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, args):
    start = time.perf_counter()
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    try:
        result = optimize(cfg.problem())
    except InfeasibleError as exc:
        report = {"status": "infeasible", "message": str(exc), "best": exc.best,
                  "violations": exc.violations}
        path = _out(cfg, f"infeasible_{_cell_stem(cfg)}.json")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report, indent=2) + "\n")
        print(f"infeasible: {exc} (report: {path})", file=sys.stderr)
        return EXIT_INFEASIBLE
    stem = _cell_stem(cfg)
    spline_path = _out(cfg, f"spline_{stem}.json")
    save_spline(result.s_star, spline_path)
    _out(cfg, f"result_{stem}.json").write_text(json.dumps(_result_dict(result), indent=2) + "\n")
    print(f"e(0;s*) = {result.objective:.6g}  max sel = {result.max_sel:.6g} at theta = "
          f"{result.argmax_theta:.6g}  min coverage = {result.min_coverage:.6g} at theta = "
          f"{result.argmin_theta:.6g}  converged = {result.converged}")
    print(f"spline written to {spline_path}")
    print(f"wall time {time.perf_counter() - start:.1f} s", file=sys.stderr)
    return EXIT_OK if result.converged else EXIT_INFEASIBLE


def _table_cell(cfg: RunConfig):
    start = time.perf_counter()
    try:
        result = optimize(cfg.problem())
    except InfeasibleError as exc:
        return {"eta": cfg.eta, "q": cfg.q, "status": "infeasible", "message": str(exc),
                "wall_time": time.perf_counter() - start}
    except ScadCIError as exc:
        return {"eta": cfg.eta, "q": cfg.q, "status": "error", "message": str(exc),
                "wall_time": time.perf_counter() - start}
    save_spline(result.s_star, _out(cfg, f"spline_{_cell_stem(cfg)}.json"))
    return {"eta": cfg.eta, "q": cfg.q, "status": "ok" if result.converged else "unverified",
            "e0": result.objective, "max_sel": result.max_sel,
            "argmax_theta": result.argmax_theta, "min_coverage": result.min_coverage,
            "argmin_theta": result.argmin_theta, "wall_time": time.perf_counter() - start}


def format_table(table_id, cells):
    """Plain-text layout: one block per eta, columns q = 4, 5, 6."""
    m = TABLE_M[table_id]
    lines = [f"Properties of the constrained minimizer s* for m = {m}"]
    by_key = {(c["eta"], c["q"]): c for c in cells}

    def cell_text(c, key):
        if c is None or c["status"] in ("infeasible", "error"):
            return "FAILED"
        return f"{c[key]:.4f}" + ("" if c["status"] == "ok" else "*")

    for eta in sorted({c["eta"] for c in cells}):
        qs = sorted(q for (e, q) in by_key if e == eta)
        lines.append("")
        lines.append(f"eta = {eta:g}")
        lines.append("  number of knots    " + "".join(f"{q:>10d}" for q in qs))
        lines.append("  e(0;s*)            " + "".join(f"{cell_text(by_key[(eta, q)], 'e0'):>10}" for q in qs))
        lines.append("  max e(theta;s*)    " + "".join(f"{cell_text(by_key[(eta, q)], 'max_sel'):>10}" for q in qs))
    if any(c["status"] == "unverified" for c in cells):
        lines.append("")
        lines.append("* post-hoc coverage scan found a violation above the slack")
    return "\n".join(lines) + "\n"


def cmd_table(cfg: RunConfig, args):
    table_id = args.table
    m = TABLE_M[table_id]
    etas = TABLE_ETAS if args.eta_list is None else tuple(float(e) for e in args.eta_list.split(","))
    qs = TABLE_QS if args.q_list is None else tuple(int(q) for q in args.q_list.split(","))
    cell_cfgs = [replace(cfg, m=m, eta=eta, q=q) for eta in etas for q in qs]
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            cells = list(pool.map(_table_cell, cell_cfgs))
    else:
        cells = []
        for c in cell_cfgs:
            cells.append(_table_cell(c))
            last = cells[-1]
            print(f"cell eta={c.eta:g} q={c.q}: {last['status']} in {last['wall_time']:.1f} s",
                  file=sys.stderr)
    header = ["m", "eta", "q", "e0", "max_sel", "argmax_theta", "min_coverage", "argmin_theta",
              "status"]
    nan = float("nan")
    rows = [[m, c["eta"], c["q"], c.get("e0", nan), c.get("max_sel", nan),
             c.get("argmax_theta", nan), c.get("min_coverage", nan),
             c.get("argmin_theta", nan), c["status"]] for c in cells]
    write_csv("table", header, rows, _out(cfg, f"table{table_id}.csv"))
    write_csv("timings", ["m", "eta", "q", "wall_time"],
              [[m, c["eta"], c["q"], c["wall_time"]] for c in cells],
              _out(cfg, f"table{table_id}_timings.csv"))
    text = format_table(table_id, cells)
    _out(cfg, f"table{table_id}.txt").write_text(text)
    sys.stdout.write(text)
    failed = [c for c in cells if c["status"] in ("infeasible", "error")]
    return EXIT_INFEASIBLE if failed else EXIT_OK


def cmd_figure(cfg: RunConfig, args):
    s = _load_matching_spline(args.spline, cfg)
    pc, st = cfg.problem_config(), cfg.settings()
    stream = None if args.output else sys.stdout
    if args.figure == 1:
        grid = cfg.theta_grid().points
        rows = list(zip(grid, sel(grid, s, pc, st), coverage(grid, s, pc, st)))
        write_csv("figure1", ["theta", "sel", "coverage"], rows, args.output, stream)
    else:
        x = np.linspace(0.0, pc.k, 201)
        knots = set(np.round(s.knots, 12))
        rows = [(xi, s_eval(s, xi), round(xi, 12) in knots) for xi in x]
        extra = [(xk, s_eval(s, xk), True) for xk in s.knots if round(xk, 12) not in set(np.round(x, 12))]
        rows = sorted(rows + extra, key=lambda r: r[0])
        write_csv("figure2", ["x", "s", "is_knot"], rows, args.output, stream)
    return EXIT_OK


def cmd_mc_check(cfg: RunConfig, args):
    s = _load_matching_spline(args.spline, cfg)
    if args.n_samples < MIN_SAMPLES:
        raise ValidationError(f"n_samples must be at least {MIN_SAMPLES}", field="n_samples")
    thetas = _parse_thetas(args.theta)
    if thetas is None:
        thetas = np.array([0.0, 0.5, 2.0, scan_horizon(cfg.problem_config())])
    pc, st = cfg.problem_config(), cfg.settings()
    rows = []
    worst = 0.0
    for th in thetas:
        est = simulate(th, s, pc, n_samples=args.n_samples, seed=cfg.seed)
        for name, quad, mc, se in (
            ("coverage", float(coverage(th, s, pc, st, signed=True)), est.coverage_est, est.coverage_se),
            ("sel", float(sel(th, s, pc, st)), est.sel_est, est.sel_se),
        ):
            z = (mc - quad) / se if se > 0 else (0.0 if mc == quad else math.inf)
            worst = max(worst, abs(z))
            rows.append([th, name, quad, mc, se, z])
    write_csv("mc_check", ["theta", "quantity", "quadrature", "monte_carlo", "mc_se", "z"], rows,
              args.output, None if args.output else sys.stdout)
    if worst > MC_Z_LIMIT:
        print(f"Monte Carlo disagreement: max |z| = {worst:.3g} > {MC_Z_LIMIT:g}", file=sys.stderr)
        return EXIT_MC_DISAGREE
    return EXIT_OK


COLUMN_NOTES = """\
output columns:
  theta         standardized parameter beta / sigma
  coverage      P(beta in J(s)): double integral over x = beta_hat/sigma_hat and w = sigma_hat/sigma
                of the exact inclusion region plus the usual-interval term on |x| >= k,
                adaptive Gauss-Kronrod over x, Gauss-Legendre over w
  sel           E(length of J(s)) / E(length of the usual t interval); adaptive quadrature of
                (s(|x|) - t) against the joint density, closed form in w at theta = 0
  e0            sel at theta = 0 of the optimized s*
  max_sel       max over theta >= 0 of sel(theta; s*), scan plus golden-section refinement
  min_coverage  min over 0 <= theta <= k + t(m) + 8 of coverage(theta; s*), same scan
  s, x          natural cubic spline s*(x) on [0, k]; s*(x) = t(m) beyond k
  monte_carlo   simulation estimate (Philox streams per block); mc_se its standard error;
                z = (monte_carlo - quadrature) / mc_se
exit status: 0 ok, 2 validation error, 3 infeasible optimization, 4 Monte Carlo disagreement
"""


def _add_config_flags(p):
    p.add_argument("--config", help="flat key = value config file")
    for f in fields(RunConfig):
        flag = f"--{f.name}"
        alias = f"--{f.name.replace('_', '-')}"
        names = [flag] if alias == flag else [flag, alias]
        p.add_argument(*names, dest=f.name, default=None, metavar=f.name.upper(),
                       help=f"override config key {f.name} (default {f.default})")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scadci",
        description="Coverage, expected length and optimal half-widths for confidence "
                    "intervals centred on the SCAD estimator.",
        epilog=COLUMN_NOTES,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=COLUMN_NOTES,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        _add_config_flags(p)
        return p

    p = add("eval", "coverage and scaled expected length of a spline on a theta list")
    p.add_argument("--spline", required=True, help="spline JSON file")
    p.add_argument("--theta", help="comma-separated theta values (default: theta grid)")
    p.add_argument("--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_eval)

    p = add("optimize", "minimize e(0; s) subject to coverage >= 1 - alpha")
    p.set_defaults(func=cmd_optimize)

    p = add("table", "optimize every (eta, q) cell for m = 200 (table 1) or m = 3 (table 2)")
    p.add_argument("--table", type=int, choices=(1, 2), required=True)
    p.add_argument("--eta-list", dest="eta_list", help="comma-separated eta values (default 0.5,1,2)")
    p.add_argument("--q-list", dest="q_list", help="comma-separated knot counts (default 4,5,6)")
    p.add_argument("--jobs", type=int, default=1, help="cells run in parallel (default 1)")
    p.set_defaults(func=cmd_table)

    p = add("figure", "curve data: 1 = sel and coverage against theta, 2 = s*(x) on [0, k]")
    p.add_argument("--figure", type=int, choices=(1, 2), required=True)
    p.add_argument("--spline", required=True, help="spline JSON file")
    p.add_argument("--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_figure)

    p = add("mc-check", "compare quadrature with Monte Carlo at a few theta values")
    p.add_argument("--spline", required=True, help="spline JSON file")
    p.add_argument("--theta", help="comma-separated theta values (default 0, 0.5, 2, k + t + 8)")
    p.add_argument("--n-samples", "--n_samples", dest="n_samples", type=int, default=4_000_000)
    p.add_argument("--output", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_mc_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        return args.func(cfg, args)
    except ValidationError as exc:
        where = f" [{exc.field}]" if getattr(exc, "field", None) else ""
        print(f"validation error{where}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DomainError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except FileNotFoundError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ScadCIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
