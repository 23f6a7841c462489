"""Command-line driver: ``sobe solve | linear | verify | sweep``.

Exit codes: 0 ok, 1 usage or configuration error, 2 numerical failure.
Every run writes a manifest.json carrying the config hash next to its CSV
outputs; identical config and seed give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import estimates
from .config import RunConfig, load_config, parse_config
from .errors import (
    AliasingWarning,
    ConfigError,
    InvalidExponent,
    LambdaExhausted,
    MaxIterExceeded,
    NoContraction,
    SobeError,
)
from .grids import SpaceTimeGrid, SpectralField, eta, write_field_binary
from .solver import (
    ScalingParams,
    boundary_errors,
    pde_residual,
    prepare_gamma,
    rescale_data,
    solve_full,
)
from .symbols import PhaseSymbol, char_poly, characteristic_roots

log = logging.getLogger("sobe")

SUITES = ("roots", "lemmas", "kato", "duhamel", "bilinear")

# module named in failure messages, by exception class
_ORIGIN = {
    "DegenerateRootsError": "symbols", "AmbiguousSignError": "symbols", "TrackingFailure": "symbols",
    "InvalidSymbolError": "symbols", "NonconvergentQuadrature": "boundary_op", "TailTooFat": "boundary_op",
    "RepresentationMismatch": "grids_norms", "ResampleOutOfWindow": "solver", "NoContraction": "solver",
    "MaxIterExceeded": "solver", "LambdaExhausted": "solver", "InvalidExponent": "estimates",
}


class Run:
    """Output directory plus the manifest that accumulates as files are written."""

    def __init__(self, cfg: RunConfig, out_dir: Path, command: str):
        self.cfg = cfg
        self.out = out_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = {"command": command, "config_hash": cfg.digest(), "config": cfg.as_dict(), "outputs": {}}

    def _record(self, path: Path):
        self.manifest["outputs"][path.name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def write_csv(self, name: str, header, rows):
        path = self.out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["config_hash", *header])
            for row in rows:
                w.writerow([self.manifest["config_hash"], *(_fmt(v) for v in row)])
        self._record(path)

    def write_json(self, name: str, payload):
        path = self.out / name
        path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
        self._record(path)

    def write_field(self, name: str, field: SpectralField):
        path = self.out / name
        write_field_binary(field, path)
        self._record(path)

    def finish(self, status: str, **extra):
        self.manifest.update(extra)
        self.manifest["status"] = status
        path = self.out / "manifest.json"
        path.write_text(json.dumps(_jsonable(self.manifest), indent=2, sort_keys=True) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ----------------------------------------------------------------------------
# solve and linear


def _h_targets(data, lam: float):
    """Callable returning the scaled boundary data (3, n) at scaled times."""
    scaled = rescale_data(data, ScalingParams(lam))

    def h_of_t(t):
        return np.stack([np.zeros_like(t) if fn is None else np.real(fn(t)) for fn in scaled.h])
    return h_of_t


def _trace_rows(u: np.ndarray, grid: SpaceTimeGrid, lam: float, h_of_t):
    """(t, u, u_xx, u_xxxx, h1, h2, h3) at x = 0 in original variables for t in [0, 1/lam^3]."""
    i0 = grid.i_x0
    npts = 13
    s = np.arange(npts, dtype=float)
    sel = (grid.t >= 0) & (grid.t <= 1.0)
    tr = []
    for order in (0, 2, 4):
        rhs = np.zeros(npts)
        rhs[order] = float(np.prod(np.arange(1, order + 1)))
        w = np.linalg.solve(np.vander(s, npts, increasing=True).T, rhs)
        tr.append(np.tensordot(w, u[i0:i0 + npts][:, sel], axes=(0, 0)) / grid.dx**order)
    h = h_of_t(grid.t[sel])
    # u = lam^4 u^lam(lam x, lam^3 t): the j-th x-derivative gains lam^j
    fac = [lam**4, lam**6, lam**8]
    rows = []
    for k, t in enumerate(grid.t[sel]):
        rows.append([t / lam**3, *(fac[m] * tr[m][k] for m in range(3)), *(fac[m] * h[m][k] for m in range(3))])
    return rows


def _solution_rows(u: np.ndarray, grid: SpaceTimeGrid, lam: float, stride: int = 4):
    xs = np.nonzero(grid.x >= 0)[0][::stride]
    ts = np.nonzero((grid.t >= 0) & (grid.t <= 1.0))[0]
    return [[grid.x[i] / lam, grid.t[j] / lam**3, lam**4 * u[i, j]] for i in xs for j in ts]


def _diagnostics(u, grid, sym, h_of_t, nonlinear):
    res, scale = pde_residual(u, grid, sym, nonlinear=nonlinear)
    berr = boundary_errors(u, grid, h_of_t)
    return {"pde_residual": res, "pde_scale": scale, "pde_relative": res / scale if scale > 0 else 0.0,
            "boundary_rel_l2": list(berr)}


def cmd_solve(cfg: RunConfig, run: Run, base_dir: Path) -> int:
    scfg = cfg.solver_config()
    data = cfg.problem_data(base_dir)
    result = solve_full(data, scfg, lam=cfg.solver.lam)
    lam = result.lam
    sym = PhaseSymbol(result.alpha, cfg.problem.beta)
    u = result.picard.solution.values.real
    h_of_t = _h_targets(data, lam)
    diag = _diagnostics(u, scfg.grid, sym, h_of_t, nonlinear=True) if not data.is_zero else {
        "pde_residual": 0.0, "pde_scale": 0.0, "pde_relative": 0.0, "boundary_rel_l2": [0.0, 0.0, 0.0]}
    run.write_csv("solution.csv", ["x", "t", "u"], _solution_rows(u, scfg.grid, lam))
    run.write_csv("traces.csv", ["t", "u", "u_xx", "u_xxxx", "h1", "h2", "h3"], _trace_rows(u, scfg.grid, lam, h_of_t))
    run.write_field("solution_scaled.bin", result.picard.solution)
    pic = result.picard
    run.finish("ok", lambda_chosen=lam, alpha_scaled=result.alpha, iterations=pic.iterations,
               contraction_ratios=list(pic.contraction_ratios), residuals={"fixed_point": pic.residual, **diag},
               norms=dict(pic.norms))
    return 0


def cmd_linear(cfg: RunConfig, run: Run, base_dir: Path) -> int:
    scfg = cfg.solver_config()
    data = cfg.problem_data(base_dir)
    lam = cfg.solver.lam or 1.0
    sp = ScalingParams(lam)
    sym = PhaseSymbol(sp.alpha, cfg.problem.beta)
    ctx = prepare_gamma(rescale_data(data, sp, scfg.grid), sym, scfg)
    u = ctx.linear
    h_of_t = _h_targets(data, lam)
    diag = _diagnostics(u, scfg.grid, sym, h_of_t, nonlinear=False) if not data.is_zero else {
        "pde_residual": 0.0, "pde_scale": 0.0, "pde_relative": 0.0, "boundary_rel_l2": [0.0, 0.0, 0.0]}
    g = scfg.grid
    tt = g.dt * np.arange(ctx.h_samples.shape[1])
    # h_samples = eta h - (tapered p) on the boundary window
    target = h_of_t(tt) * eta(scfg.cutoff, tt)[None, :]
    p = target - ctx.h_samples
    run.write_csv("free_traces.csv", ["t", "p1", "p2", "p4"],
                  [[t / lam**3, p[0, k], p[1, k], p[2, k]] for k, t in enumerate(tt)])
    run.write_csv("traces.csv", ["t", "u", "u_xx", "u_xxxx", "h1", "h2", "h3"], _trace_rows(u, g, lam, h_of_t))
    run.write_csv("boundary_reproduction.csv", ["channel", "rel_l2"],
                  [[name, e] for name, e in zip(("u", "u_xx", "u_xxxx"), diag["boundary_rel_l2"])])
    run.write_csv("solution.csv", ["x", "t", "u"], _solution_rows(u, g, lam))
    run.finish("ok", lambda_chosen=lam, residuals=diag)
    return 0


# ----------------------------------------------------------------------------
# verification suites


def suite_roots(cfg: RunConfig):
    """Residual, root count and Vandermonde identity on random (rho, alpha, beta)."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.verify.roots_samples
    worst = {"residual": 0.0, "delta_identity": 0.0}
    count_ok = True
    for _ in range(n):
        alpha = float(rng.uniform(0.05, 1.0))
        beta = int(rng.choice([-1, 1]))
        rho = complex(10 ** rng.uniform(-1, 2) * np.exp(1j * rng.uniform(-np.pi / 2 + 1e-3, np.pi / 2 - 1e-3)))
        sym = PhaseSymbol(alpha, beta)
        rs = characteristic_roots(sym, rho)
        z = np.asarray(rs.roots) ** 2
        scale = np.abs(z) ** 3 + alpha * np.abs(z) ** 2 + alpha**2 * np.abs(z) + abs(rho) ** 2
        worst["residual"] = max(worst["residual"], float(np.max(np.abs(char_poly(sym, z, rho)) / scale)))
        sextic = np.roots([1, 0, -alpha * beta, 0, alpha**2, 0, -(rho**2)])
        count_ok &= bool(np.sum(sextic.real < 0) == 3 and np.all(np.asarray(rs.roots).real < 0))
        det = np.linalg.det(np.vstack([np.ones(3), z, z**2]))
        worst["delta_identity"] = max(worst["delta_identity"], abs(rs.delta - det) / max(abs(det), 1e-300))
    passed = worst["residual"] <= 1e-10 and worst["delta_identity"] <= 1e-12 and count_ok
    rows = [["roots", "residual_max", worst["residual"]], ["roots", "delta_identity_max", worst["delta_identity"]],
            ["roots", "three_decaying_roots", float(count_ok)]]
    return {"suite": "roots", "pass": passed, "samples": n, **worst, "three_decaying_roots": count_ok}, rows


def suite_lemmas(cfg: RunConfig):
    lm = cfg.verify.lemmas
    reports = [estimates.check_lemma_int_tau(r1, r2, 3.0, -2.0, samples=lm.samples, seed=cfg.seed,
                                             separations=lm.separations) for r1, r2 in lm.int_tau]
    shifted = [estimates.check_lemma_int_tau(r1, r2, 3.0 + 17.25, -2.0 + 17.25, samples=lm.samples, seed=cfg.seed,
                                             separations=lm.separations) for r1, r2 in lm.int_tau]
    q, c, p = lm.poly_rho
    reports += [
        estimates.check_lemma_poly("quad_half", [1.0, -0.4, 0.3], q),
        estimates.check_lemma_poly("cubic_third", [1.0, -2.0, 0.5, 3.0], c),
        estimates.check_lemma_poly("quad_product", [1.0, 0.5, 2.0], p),
    ]
    ok = True
    for a, b in zip(reports, shifted):
        ok &= abs(a.params["ratio"] / b.params["ratio"] - 1) <= 0.02 and a.max_ratio <= 1.5
    for r in reports[len(shifted):]:
        ok &= max(r.ratios) / min(r.ratios) - 1 <= 0.02
    rows = [[r.check_id, json.dumps(r.params, sort_keys=True), lv, v, r.trend_slope, r.verdict]
            for r in reports for lv, v in zip(r.levels, r.ratios)]
    return {"suite": "lemmas", "pass": bool(ok), "reports": [dataclasses.asdict(r) for r in reports]}, rows


def _ratio_grids(cfg: RunConfig):
    rs = cfg.verify.ratios
    return [SpaceTimeGrid(rs.x_extent, nx, rs.t_extent, nt) for nx, nt in zip(rs.nx, rs.nt)]


def suite_kato(cfg: RunConfig):
    rs = cfg.verify.ratios
    grids = _ratio_grids(cfg)
    reports = [estimates.kato_ratio(j, rs.s, rs.sigma, grids, n_samples=rs.samples, seed=cfg.seed) for j in rs.j]
    ok = True
    for r in reports:
        spread = max(r.ratios) / min(r.ratios) - 1
        ok &= r.verdict == "stable" and spread <= rs.tolerance
    rows = [[r.check_id, json.dumps(r.params, sort_keys=True), lv, v, r.trend_slope, r.verdict]
            for r in reports for lv, v in zip(r.levels, r.ratios)]
    return {"suite": "kato", "pass": bool(ok), "reports": [dataclasses.asdict(r) for r in reports]}, rows


def suite_duhamel(cfg: RunConfig):
    rs = cfg.verify.ratios
    grids = _ratio_grids(cfg)[:2]
    reports = [estimates.duhamel_ratio(rs.s, 0.5, rs.sigma - 1, g, n_samples=rs.samples, seed=cfg.seed,
                                       lattice=grids[0]) for g in grids]
    ok = all(r.verdict == "stable" for r in reports)
    ok &= all(abs(b / a - 1) <= rs.tolerance for a, b in zip(reports[0].ratios, reports[1].ratios))
    rows = [[r.check_id, json.dumps(r.params, sort_keys=True), lv, v, r.trend_slope, r.verdict]
            for r in reports for lv, v in zip(r.levels, r.ratios)]
    return {"suite": "duhamel", "pass": bool(ok), "reports": [dataclasses.asdict(r) for r in reports]}, rows


def suite_bilinear(cfg: RunConfig):
    """Above s = -3/4 the last refinement must change the constant by <= 10%;
    below it the expected verdict is "growing"."""
    reports = estimates.bilinear_sweep(cfg.sweep_config())
    ok = True
    for r in reports:
        if r.params["s"] > -0.75:
            ok &= abs(r.ratios[-1] / r.ratios[-2] - 1) <= 0.10
        else:
            ok &= r.verdict == "growing"
    rows = [[r.check_id, json.dumps(r.params, sort_keys=True), lv, v, r.trend_slope, r.verdict]
            for r in reports for lv, v in zip(r.levels, r.ratios)]
    return {"suite": "bilinear", "pass": bool(ok), "reports": [dataclasses.asdict(r) for r in reports]}, rows


_SUITE_FN = {"roots": suite_roots, "lemmas": suite_lemmas, "kato": suite_kato, "duhamel": suite_duhamel,
             "bilinear": suite_bilinear}

_REPORT_HEADER = ["check_id", "params", "level", "ratio", "trend_slope", "verdict"]


def _run_suites(cfg: RunConfig, names):
    with ThreadPoolExecutor(max_workers=max(1, cfg.threads)) as pool:
        futures = [pool.submit(_SUITE_FN[n], cfg) for n in names]
        return [f.result() for f in futures]


def cmd_verify(cfg: RunConfig, run: Run, suite: str) -> int:
    names = SUITES if suite == "all" else (suite,)
    results = _run_suites(cfg, names)
    verdicts = {}
    for name, (summary, rows) in zip(names, results):
        header = ["check", "quantity", "value"] if name == "roots" else _REPORT_HEADER
        run.write_csv(f"verify_{name}.csv", header, rows)
        verdicts[name] = summary
    run.write_json("verdicts.json", verdicts)
    passed = all(v["pass"] for v in verdicts.values())
    run.finish("pass" if passed else "fail", verdicts={k: v["pass"] for k, v in verdicts.items()})
    return 0 if passed else 2


def cmd_sweep(cfg: RunConfig, run: Run) -> int:
    """Plot-ready tables: bilinear constants per level and Kato ratios per j."""
    results = _run_suites(cfg, ("bilinear", "kato"))
    for name, (summary, rows) in zip(("bilinear", "kato"), results):
        run.write_csv(f"sweep_{name}.csv", _REPORT_HEADER, rows)
    run.finish("ok")
    return 0


# ----------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="YAML run configuration")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (overrides the config)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker pool size")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="sobe", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="nonlinear quarter-plane solve")
    sub.add_parser("linear", parents=[common], help="linear representation only")
    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("suite", help="one of " + ", ".join((*SUITES, "all")))
    sub.add_parser("sweep", parents=[common], help="bilinear and Kato sweeps as CSV")
    return p


def _load(args) -> tuple[RunConfig, Path]:
    path = getattr(args, "config", None)
    if path is None:
        cfg, base = parse_config({}), Path.cwd()
    else:
        cfg, base = load_config(path), Path(path).resolve().parent
    overrides = {}
    for key in ("seed", "threads"):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    if hasattr(args, "out_dir"):
        overrides["out_dir"] = args.out_dir
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    if cfg.threads < 1:
        raise ConfigError("threads must be at least 1")
    return cfg, base


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "verify" and args.suite not in (*SUITES, "all"):
        print(f"error: unknown suite {args.suite!r}", file=sys.stderr)
        return 1
    try:
        cfg, base = _load(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    run = Run(cfg, Path(cfg.out_dir), args.command)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AliasingWarning)
            if args.command == "solve":
                return cmd_solve(cfg, run, base)
            if args.command == "linear":
                return cmd_linear(cfg, run, base)
            if args.command == "verify":
                return cmd_verify(cfg, run, args.suite)
            return cmd_sweep(cfg, run)
    except (ConfigError, InvalidExponent) as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.finish("config-error", error=str(exc))
        return 1
    except (NoContraction, LambdaExhausted, MaxIterExceeded, SobeError) as exc:
        origin = _ORIGIN.get(type(exc).__name__, "solver")
        print(f"error [{origin}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        run.finish("numerical-failure", error=f"{origin}: {type(exc).__name__}: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
