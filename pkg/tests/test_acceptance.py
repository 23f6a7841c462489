"""One test per acceptance criterion, each at its stated tolerance."""

import json
import warnings

import numpy as np
import pytest
import yaml
from scipy.integrate import solve_ivp

from acceptance_log import verdict
from oracles import bump_data, polynomial_roots, sine_series_solution
from sobe import estimates
from sobe.boundary import BoundaryConfig, BoundaryTriple, wbdr_total
from sobe.cli import main
from sobe.errors import AliasingWarning
from sobe.grids import SpaceTimeGrid, SpectralField, from_dual_x
from sobe.propagator import InitialPair, duhamel_modes, free_evolution, free_modes
from sobe.solver import (
    ProblemData,
    ScalingParams,
    SolverConfig,
    boundary_errors,
    pde_residual,
    picard_solve,
    rescale_data,
    solve_full,
)
from sobe.symbols import PhaseSymbol, characteristic_roots, oscillatory_roots, phase

SYM = PhaseSymbol(1.0, 1)


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        yield


def test_1_root_correctness():
    rng = np.random.default_rng(2024)
    worst_res = worst_delta = 0.0
    counts_ok = True
    for _ in range(1000):
        a = float(rng.uniform(0.01, 1.0))
        b = int(rng.choice([-1, 1]))
        rho = complex(10 ** rng.uniform(-2, 3) * np.exp(1j * rng.uniform(-1.5, 1.5)))
        sym = PhaseSymbol(a, b)
        rs = characteristic_roots(sym, rho)
        g = np.asarray(rs.roots)
        terms = np.abs(np.stack([g**6, a * b * g**4, a * a * g**2, np.full(3, rho**2)]))
        res = np.abs(g**6 - a * b * g**4 + a * a * g**2 - rho**2) / terms.max(axis=0)
        worst_res = max(worst_res, float(res.max()))
        all_roots = polynomial_roots(a, b, rho)
        counts_ok &= bool(np.sum(all_roots.real < 0) == 3 and np.all(g.real < 0))
        z = g**2
        det = np.linalg.det(np.vstack([np.ones(3), z, z**2]).astype(complex))
        worst_delta = max(worst_delta, abs(rs.delta - det) / abs(det))
    ok = worst_res <= 1e-10 and worst_delta <= 1e-12 and counts_ok
    verdict("[1] root correctness", ok,
            f"residual {worst_res:.2e}, Delta identity {worst_delta:.2e}, three decaying roots {counts_ok}")


def test_2_oscillatory_roots():
    rng = np.random.default_rng(7)
    exact = True
    worst = 0.0
    for mu in np.linspace(1.0, 100.0, 100):
        sym = PhaseSymbol(float(rng.uniform(0.05, 1.0)), int(rng.choice([-1, 1])))
        d = oscillatory_roots(sym, mu)
        exact &= d.gamma_plus[0] == -1j * mu
        ph = phase(sym, mu)
        for eps in (1e-8, 1e-10):
            lim = characteristic_roots(sym, eps * ph + 1j * ph).roots
            for g in d.gamma_plus:
                worst = max(worst, float(np.min(np.abs(lim - g)) / max(1.0, abs(g))))
    p2 = oscillatory_roots(SYM, 1.0).p ** 2
    p2_err = abs(p2 - (1 + np.sqrt(3)) / 2)
    ok = exact and worst <= 1e-6 and p2_err <= 1e-12
    verdict("[2] oscillatory roots", ok,
            f"gamma1 exact {exact}, limit mismatch {worst:.2e}, p^2 error {p2_err:.2e}")


def test_3_free_propagator():
    g = SpaceTimeGrid(x_extent=20.0, nx=256, t_extent=4.0, nt=512)
    x = g.x
    data = InitialPair(np.exp(-x**2), 0.5 * np.exp(-x**2 / 2), half_line=False)
    u, ut = free_modes(data, SYM, g, times=[0.0])
    u0 = from_dual_x(SpectralField(g, np.repeat(u, g.nt, axis=1), "dual_x")).values[:, 0]
    ut0 = from_dual_x(SpectralField(g, np.repeat(ut, g.nt, axis=1), "dual_x")).values[:, 0]
    e_u0 = float(np.max(np.abs(u0 - data.phi)))
    e_ut0 = float(np.max(np.abs(ut0 - 0.5 * (x**2 - 1) * np.exp(-x**2 / 2))))
    uu, uut = free_modes(data, SYM, g, np.linspace(0, 2, 41))
    ph = phase(SYM, g.xi)[:, None]
    e = ph**2 * np.abs(uu) ** 2 + np.abs(uut) ** 2
    live = e[:, 0] > 1e-30
    e_energy = float(np.max(np.abs(e[live] / e[live, :1] - 1)))
    gc = SpaceTimeGrid(x_extent=16 * np.pi, nx=256, t_extent=2.0, nt=64)
    uc = free_evolution(InitialPair(np.cos(gc.x), np.zeros(gc.nx), half_line=False), SYM, gc).values
    e_cos = float(np.max(np.abs(uc - np.cos(np.sqrt(3) * gc.t)[None, :] * np.cos(gc.x)[:, None])))
    ok = e_u0 <= 1e-13 and e_ut0 <= 1e-10 and e_energy <= 1e-8 and e_cos <= 1e-10
    verdict("[3] free propagator", ok,
            f"u(0) {e_u0:.1e}, u_t(0) {e_ut0:.1e}, energy {e_energy:.1e}, cos x {e_cos:.1e}")


def test_4_duhamel():
    g = SpaceTimeGrid(x_extent=20.0, nx=256, t_extent=4.0, nt=512)
    a = np.exp(-g.xi**2)

    def gfun(t):
        return np.cos(3 * t) * np.exp(-t**2 / 2)

    f = SpectralField(g, (a[:, None] * gfun(g.t)[None, :]).astype(complex), "dual_x")
    uhat, _ = duhamel_modes(f, SYM)
    sel = np.arange(g.i_t0, g.i_t0 + 129)
    ts = g.t[sel]
    worst_rk = 0.0
    for k in range(g.nx // 2 - 24, g.nx // 2 + 25, 4):
        xi, w = g.xi[k], phase(SYM, g.xi[k])

        def rhs(t, y, xi=xi, w=w, ak=a[k]):
            return [y[1], -w * w * y[0] - xi * xi * ak * gfun(t)]

        if xi == 0:
            continue
        sol = solve_ivp(rhs, (0, ts[-1]), [0.0, 0.0], t_eval=ts, method="DOP853", rtol=1e-12, atol=1e-18 * a[k])
        worst_rk = max(worst_rk, float(np.max(np.abs(uhat[k, sel] - sol.y[0])) / np.max(np.abs(sol.y[0]))))
    fc = SpectralField(g, np.repeat(a[:, None], g.nt, axis=1).astype(complex), "dual_x")
    uc, _ = duhamel_modes(fc, SYM)
    ph = phase(SYM, g.xi)
    safe = np.where(ph > 0, ph, 1.0)
    want = np.where(ph[:, None] > 0, -(g.xi**2 * a)[:, None] * (1 - np.cos(ph[:, None] * g.t[None, :]))
                    / safe[:, None] ** 2, 0.0)
    e_const = float(np.max(np.abs(uc - want)))
    ok = worst_rk <= 1e-6 and e_const <= 1e-8
    verdict("[4] Duhamel", ok, f"mode ODE rel {worst_rk:.1e}, constant forcing {e_const:.1e}")


def _bump(t, lo=0.2, hi=0.8):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = (t > lo) & (t < hi)
    r = (t[m] - lo) / (hi - lo)
    out[m] = np.exp(1 - 1 / (4 * r * (1 - r)))
    return out


def test_5_boundary_operator():
    t = np.linspace(0, 1.2, 61)
    repro = []
    for ch in range(3):
        chans = [None] * 3
        chans[ch] = _bump
        h = BoundaryTriple(tuple(chans), 1.0)
        for m in range(3):
            got = wbdr_total(h, SYM, [0.0], t, order=2 * m).values[0]
            target = _bump(t) if m == ch else 0.0
            repro.append(float(np.linalg.norm(got - target) / np.linalg.norm(_bump(t))))
    h = BoundaryTriple((_bump, None, None), 1.0)
    hx, ht, k = 0.25, 0.0025, 4
    x = np.arange(0.5, 5.0 + 1e-9, hx)
    tt = np.arange(0.3 - k * ht, 0.7 + k * ht + 1e-9, ht)
    u = [wbdr_total(h, SYM, x, tt, order=o).values for o in (0, 2, 4, 6)]
    s = np.arange(-k, k + 1, dtype=float)
    w = np.linalg.solve(np.vander(s, 2 * k + 1, increasing=True).T, np.eye(2 * k + 1)[2] * 2)
    utt = sum(wi * u[0][:, i:tt.size - 2 * k + i] for i, wi in enumerate(w)) / ht**2
    terms = [utt, -u[1][:, k:-k], u[2][:, k:-k], -u[3][:, k:-k]]
    scale = max(float(np.max(np.abs(T))) for T in terms)
    resid = float(np.max(np.abs(sum(terms)))) / scale
    h2 = BoundaryTriple((_bump, None, _bump), 1.0)
    xs, ts = np.linspace(0, 4, 9), np.linspace(0, 1.5, 31)
    base = wbdr_total(h2, SYM, xs, ts).values
    dbl = wbdr_total(h2, SYM, xs, ts, BoundaryConfig().doubled()).values
    doubling = float(np.max(np.abs(base - dbl)) / np.max(np.abs(base)))
    cfg = BoundaryConfig(mu_max=8.0)

    def other(t):
        return 0.5 * _bump(t, 0.1, 0.6)

    w1 = wbdr_total(BoundaryTriple((_bump, None, None), 1.0), SYM, xs, ts, cfg).values
    w2 = wbdr_total(BoundaryTriple((None, other, None), 1.0), SYM, xs, ts, cfg).values
    w12 = wbdr_total(BoundaryTriple((lambda v: 2 * _bump(v), lambda v: -3 * other(v), None), 1.0),
                     SYM, xs, ts, cfg).values
    lin = float(np.max(np.abs(w12 - 2 * w1 + 3 * w2)) / np.max(np.abs(w12)))
    ok = max(repro) <= 1e-3 and resid <= 1e-4 and doubling <= 1e-4 and lin <= 1e-10
    verdict("[5] boundary operator", ok,
            f"reproduction {max(repro):.1e}, residual {resid:.1e} x scale, doubling {doubling:.1e}, linearity {lin:.1e}")


def test_6_nonlinear_solver():
    cfg = SolverConfig()
    g = cfg.grid
    zero = picard_solve(ProblemData(), SYM, cfg)
    zero_ok = not np.any(zero.solution.values)
    phi = bump_data(0.05)
    r = picard_solve(ProblemData(phi=phi, x_support=15.0), SYM, cfg)
    u = r.solution.values.real
    ratios_ok = bool(r.contraction_ratios) and max(r.contraction_ratios) < 1
    fixed = r.residual
    n = g.nx // 2
    _, t, ref = sine_series_solution(phi, 1.0, 1.0, g.x_extent, n, 1.0, g.dt / 8, 8)
    ours = u[g.i_x0 + 1:g.i_x0 + n, g.i_t0:g.i_t0 + t.size]
    err = float(np.linalg.norm(ours - ref) / np.linalg.norm(ref))
    res, scale = pde_residual(u, g, SYM)
    bdr = boundary_errors(u, g, lambda tt: np.zeros((3, len(tt))))
    ok = (zero_ok and ratios_ok and fixed <= 10 * cfg.picard.rel_tol and err <= 1e-3
          and res <= 1e-3 * scale and float(bdr.max()) <= 5e-3)
    verdict("[6] nonlinear solver", ok,
            f"zero {zero_ok}, max ratio {max(r.contraction_ratios):.2e}, fixed point {fixed:.1e}, "
            f"vs time stepper {err:.1e}, residual {res / scale:.1e} x scale, boundary {bdr.max():.1e}")


def test_7_scaling_covariance():
    cfg = SolverConfig()
    d = ProblemData(phi=bump_data(0.05, 3.5, 0.7, (0.5, 1.5)), x_support=6.0)
    x, t = np.linspace(0, 5, 41), np.linspace(0, 1 / 64, 9)
    ua = solve_full(d, cfg, lam=2.0).unscaled(x, t)
    ub = solve_full(d, cfg, lam=4.0).unscaled(x, t)
    agree = float(np.linalg.norm(ua - ub) / np.linalg.norm(ub))
    from scipy.integrate import quad

    phi = bump_data(1.0, 3.0, 1.0, (0.5, 1.5))
    h1 = bump_data(1.0, 0.5, 0.2, (0.05, 0.2))
    dd = ProblemData(phi=phi, psi=phi, h=(h1, h1, h1), x_support=6.0, t_support=1.0)
    lam = 2.0
    ds = rescale_data(dd, ScalingParams(lam))

    def l2(f, hi):
        return np.sqrt(quad(lambda y: f(y) ** 2, 0, hi, limit=400, epsabs=0, epsrel=1e-13)[0])

    factors = [l2(ds.phi, 12) / l2(phi, 6) / lam**-3.5, l2(ds.psi, 12) / l2(phi, 6) / lam**-4.5]
    factors += [l2(ds.h[m], 8) / l2(h1, 1) / lam ** (1.5 - p) for m, p in enumerate((4, 6, 8))]
    worst = max(abs(f - 1) for f in factors)
    ok = agree <= 1e-3 and worst <= 1e-10
    verdict("[7] scaling covariance", ok, f"lambda 2 vs 4 {agree:.1e}, norm factors {worst:.1e}")


def test_8_estimate_suite():
    lem = []
    for r1, r2 in ((2.0, 1.0), (1.5, 0.5), (3.0, 3.0)):
        a = estimates.check_lemma_int_tau(r1, r2, 3.0, -2.0)
        b = estimates.check_lemma_int_tau(r1, r2, 3.0 + 17.25, -2.0 + 17.25)
        lem.append(abs(a.params["ratio"] / b.params["ratio"] - 1))
    for kind, coef, rho in (("quad_half", [1.0, -0.4, 0.3], 0.75), ("cubic_third", [1.0, -2.0, 0.5, 3.0], 0.6),
                            ("quad_product", [1.0, 0.5, 2.0], 1.5)):
        rep = estimates.check_lemma_poly(kind, coef, rho)
        lem.append(max(rep.ratios) / min(rep.ratios) - 1)
    half = estimates.poly_integral([4.0, 0, 0], 1.0) / estimates.poly_integral([1.0, 0, 0], 1.0)
    lem.append(abs(half / 0.5 - 1))
    cubic = estimates.poly_integral([8.0, 0, 0, 0], 0.6) * 2 / estimates.poly_integral([1.0, 0, 0, 0], 0.6)
    lem.append(abs(cubic - 1))
    lemma_ok = max(lem[:-1]) <= 0.02 and lem[-1] <= 0.05

    grids = [SpaceTimeGrid(20.0, nx, 4.0, nt) for nx, nt in ((128, 64), (256, 128), (512, 256))]
    kato = [estimates.kato_ratio(j, -0.7, 0.55, grids, n_samples=8) for j in (0, 2, 3)]
    kato_spread = max(max(r.ratios) / min(r.ratios) - 1 for r in kato)
    duh = [estimates.duhamel_ratio(-0.7, 0.5, -0.45, gg, n_samples=8, lattice=grids[0]) for gg in grids[:2]]
    duh_spread = max(abs(b / a - 1) for a, b in zip(duh[0].ratios, duh[1].ratios))
    ok = lemma_ok and kato_spread <= 0.15 and duh_spread <= 0.15
    verdict("[8] estimate suite", ok,
            f"lemma invariance {max(lem):.1e}, Kato spread {kato_spread:.1e}, Duhamel spread {duh_spread:.1e}")


@pytest.fixture(scope="module")
def bilinear_reports():
    return {r.params["s"]: r for r in estimates.bilinear_sweep(estimates.SweepConfig())}


def test_9a_bilinear_above_threshold(bilinear_reports):
    r = bilinear_reports[-0.7]
    change = abs(r.ratios[-1] / r.ratios[-2] - 1)
    verdict("[9a] bilinear s=-0.7", change <= 0.10,
            f"constants {', '.join(f'{v:.4f}' for v in r.ratios)}, last change {change:.1%}")


def test_9b_bilinear_below_threshold(bilinear_reports):
    r = bilinear_reports[-0.9]
    growth = r.growth_factors()
    verdict("[9b] bilinear s=-0.9", min(growth) >= 1.5,
            f"constants {', '.join(f'{v:.4f}' for v in r.ratios)}, growth per level "
            f"{', '.join(f'{x:.3f}' for x in growth)}")


def test_10_determinism(tmp_path):
    body = {"seed": 3, "problem": {"phi": {"profile": "gaussian-truncated", "amplitude": 0.05, "center": 10.0,
                                           "width": 1.5}},
            "solver": {"lam": 1.0}, "verify": {"roots_samples": 200}}
    manifests = []
    for k in range(2):
        body["out_dir"] = str(tmp_path / f"run{k}")
        path = tmp_path / f"c{k}.yaml"
        path.write_text(yaml.safe_dump(body))
        assert main(["solve", "--config", str(path)]) == 0
        assert main(["verify", "roots", "--config", str(path), "--out-dir", str(tmp_path / f"ver{k}")]) == 0
        manifests.append(json.loads((tmp_path / f"run{k}" / "manifest.json").read_text()))
        manifests.append(json.loads((tmp_path / f"ver{k}" / "manifest.json").read_text()))
    same = manifests[0]["outputs"] == manifests[2]["outputs"] and manifests[1]["outputs"] == manifests[3]["outputs"]
    same &= all((tmp_path / "run0" / n).read_bytes() == (tmp_path / "run1" / n).read_bytes()
                for n in manifests[0]["outputs"])
    cfg = estimates.SweepConfig()
    c1 = estimates.bilinear_constant(-0.7, 0.505, 64, cfg).constant
    c2 = estimates.bilinear_constant(-0.7, 0.505, 64, cfg).constant
    same &= c1 == c2
    verdict("[10] determinism", bool(same), f"{len(manifests[0]['outputs'])} solve outputs and sweep value identical")
