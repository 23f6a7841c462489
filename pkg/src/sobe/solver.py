"""Nonlinear quarter-plane solver: rescaling, the map Gamma and Picard iteration.

Gamma(u) = eta(t) [ W_R(phi*, psi*) + W_bdr(h - p) + D(f*) - W_bdr(q) ],

with f = -u^2 the forcing of u_tt + L u = f_xx, p and q the x = 0 traces of
the free and Duhamel parts, and D the Duhamel integral.  The two boundary
terms are merged into one evaluation of W_bdr(eta (h - p - q)); by causality
the taper eta does not change anything on the unit interval.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .boundary import BoundaryConfig, BoundaryTriple, wbdr_total
from .errors import (
    LambdaExhausted,
    MaxIterExceeded,
    NoContraction,
    NonconvergentQuadrature,
    ResampleOutOfWindow,
    TailTooFat,
)
from .grids import (
    CutoffSpec,
    NormSpec,
    SpaceTimeGrid,
    SpectralField,
    composite_norm,
    eta,
    from_dual_x,
    sobolev_norm_halfline,
    to_dual,
    to_dual_x,
)
from .propagator import InitialPair, duhamel_modes, free_modes
from .symbols import PhaseSymbol

log = logging.getLogger(__name__)

# grid-aligned smooth reflection: f(-y) ~ sum_k a_k f(k y), matching derivatives 0..3 at y = 0
_REFLECT_K = np.arange(1, 5)
_REFLECT_A = np.linalg.solve(np.vander(-_REFLECT_K.astype(float), 4, increasing=True).T, np.ones(4))


def sigma0(s: float) -> float:
    """Upper end of the admissible sigma range, 7/12 - (-s)/9."""
    return 7.0 / 12.0 + s / 9.0


@dataclass(frozen=True)
class ScalingParams:
    lam: float = 1.0

    def __post_init__(self):
        if self.lam < 1:
            raise ValueError("lambda must be >= 1")

    @property
    def alpha(self) -> float:
        return self.lam**-2


@dataclass(frozen=True)
class PicardConfig:
    max_iter: int = 30
    rel_tol: float = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    s: float = -0.7
    sigma: float = 0.505
    b: float = 0.5
    beta: int = 1
    grid: SpaceTimeGrid = SpaceTimeGrid()
    picard: PicardConfig = PicardConfig()
    boundary: BoundaryConfig = BoundaryConfig()
    cutoff: CutoffSpec = CutoffSpec()
    lambda_max: int = 64
    mollify_width: float = 0.0
    dealias: bool = True

    def __post_init__(self):
        if not self.s > -0.75:
            raise ValueError(f"s must exceed -3/4, got {self.s}")
        if not (0.5 < self.sigma <= sigma0(self.s) + 1e-12):
            raise ValueError(f"sigma must lie in (1/2, {sigma0(self.s):.4f}] for s = {self.s}")
        if self.picard.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.beta not in (1, -1):
            raise ValueError("beta must be +1 or -1")

    @property
    def norm(self) -> NormSpec:
        return NormSpec(self.s, self.b, self.sigma, "composite")


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ProblemData:
    """Initial data phi, psi (functions of x >= 0) and boundary data h1..h3 (functions of t >= 0).

    ``x_support`` bounds the support of phi and psi; ``t_support`` that of h.
    """

    phi: Optional[Callable] = None
    psi: Optional[Callable] = None
    h: tuple = (None, None, None)
    x_support: float = 0.0
    t_support: float = 0.0

    @property
    def is_zero(self) -> bool:
        return self.phi is None and self.psi is None and all(c is None for c in self.h)


def rescale_data(d: ProblemData, sp: ScalingParams, grid: SpaceTimeGrid | None = None) -> ProblemData:
    """phi^l = l^-4 phi(x/l), psi^l = l^-5 psi(x/l), h^l = (l^-4, l^-6, l^-8) h(t/l^3)."""
    lam = float(sp.lam)
    if grid is not None and lam * d.x_support > grid.x_extent * 0.75:
        raise ResampleOutOfWindow(
            f"scaled initial support {lam * d.x_support:.3g} exceeds 3/4 of the box {grid.x_extent:.3g}"
        )
    if lam == 1.0:
        return d

    def sx(f, p):
        return None if f is None else (lambda x, f=f: lam**-p * f(np.asarray(x) / lam))

    def st(f, p):
        return None if f is None else (lambda t, f=f: lam**-p * f(np.asarray(t) / lam**3))

    return ProblemData(
        phi=sx(d.phi, 4),
        psi=sx(d.psi, 5),
        h=tuple(st(f, p) for f, p in zip(d.h, (4, 6, 8))),
        x_support=lam * d.x_support,
        t_support=lam**3 * d.t_support,
    )


def reflect_extend(values: np.ndarray, grid: SpaceTimeGrid, width: float = 2.0) -> np.ndarray:
    """Fill x < 0 rows from x >= 0 rows by a C^3 reflection, tapered to zero.

    The reflection only reads values within 4 * width of the origin, so
    features far from the boundary are not copied towards it.
    """
    out = np.array(values, copy=True)
    i0 = grid.i_x0
    reach = min((grid.nx - 1 - i0) // 4, max(4, int(round(width / grid.dx))))
    taper_c = CutoffSpec(0.5 * reach * grid.dx, reach * grid.dx)
    out[:i0] = 0.0
    for j in range(1, reach + 1):
        acc = 0.0
        for a, k in zip(_REFLECT_A, _REFLECT_K):
            acc = acc + a * values[i0 + k * j]
        out[i0 - j] = eta(taper_c, j * grid.dx) * acc
    return out


def _dealias(values: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    """Two-thirds rule in x."""
    f = to_dual_x(SpectralField(grid, values.astype(complex), "physical"))
    keep = np.abs(grid.xi) <= (2.0 / 3.0) * np.max(np.abs(grid.xi))
    f = SpectralField(grid, f.values * keep[:, None], "dual_x")
    return from_dual_x(f).values


def _traces_from_modes(uhat: np.ndarray, grid: SpaceTimeGrid) -> np.ndarray:
    """(u, u_xx, u_xxxx) at x = 0 from (xi, t) amplitudes; shape (3, nt)."""
    c = grid.dxi / np.sqrt(2 * np.pi)
    xi2 = grid.xi**2
    return np.stack([c * np.sum(uhat, axis=0), -c * xi2 @ uhat, c * (xi2**2) @ uhat]).real


@dataclass
class GammaContext:
    """Everything Gamma needs that does not depend on u (sampled scaled data, linear part)."""

    grid: SpaceTimeGrid
    sym: PhaseSymbol
    cfg: SolverConfig
    linear: np.ndarray = field(repr=False)  # eta * (W_R + W_bdr(h - p)) on the grid, real
    h_samples: np.ndarray = field(repr=False)  # (3, n_b) boundary data minus free traces
    t_index: np.ndarray = field(repr=False)  # grid t indices of the boundary window
    x_index: np.ndarray = field(repr=False)
    eta_t: np.ndarray = field(repr=False)
    mu_max_log: list = field(default_factory=list)


def _boundary_window(grid: SpaceTimeGrid, c: CutoffSpec):
    """Grid t indices covering [0, outer) plus the boundary-sample length on [0, outer]."""
    i0 = grid.i_t0
    n_out = int(round(c.outer / grid.dt))
    if abs(n_out * grid.dt - c.outer) > 1e-9:
        raise ValueError("the cutoff support must be a multiple of dt")
    idx = np.arange(i0, min(grid.nt, i0 + n_out))
    return idx, n_out


def _mollify(samples: np.ndarray, width: float, dt: float) -> np.ndarray:
    if width <= 0:
        return samples
    from scipy.ndimage import gaussian_filter1d

    return gaussian_filter1d(samples, width / dt, axis=-1, mode="constant")


def _wbdr_on_grid(ctx: GammaContext, samples: np.ndarray) -> np.ndarray:
    """eta-tapered boundary samples on [0, outer] -> W_bdr on the x >= 0, t in [0, outer) block."""
    g = ctx.grid
    bt = BoundaryTriple(tuple(samples), ctx.cfg.cutoff.outer, g.dt)
    x = g.x[ctx.x_index]
    t = g.t[ctx.t_index]
    res = wbdr_total(bt, ctx.sym, x, t, ctx.cfg.boundary)
    ctx.mu_max_log.append(res.mu_max)
    return res.values


def _taper_samples(ctx: GammaContext, series: np.ndarray, n_b: int) -> np.ndarray:
    """Restrict full-grid time series (3, nt) to [0, outer] and multiply by eta."""
    g = ctx.grid
    i0 = g.i_t0
    out = np.zeros((3, n_b + 1))
    m = min(n_b + 1, g.nt - i0)
    out[:, :m] = series[:, i0:i0 + m]
    tt = g.dt * np.arange(n_b + 1)
    return out * eta(ctx.cfg.cutoff, tt)[None, :]


def prepare_gamma(d: ProblemData, sym: PhaseSymbol, cfg: SolverConfig) -> GammaContext:
    """Sample the (already scaled) data on the grid and build the u-independent part of Gamma."""
    g = cfg.grid
    t_idx, n_b = _boundary_window(g, cfg.cutoff)
    x_idx = np.nonzero(g.x >= 0)[0]
    eta_t = eta(cfg.cutoff, g.t)
    ctx = GammaContext(g, sym, cfg, np.zeros((g.nx, g.nt)), np.zeros((3, n_b + 1)), t_idx, x_idx, eta_t)
    if d.is_zero:
        return ctx
    pos = g.x >= 0
    phi = np.where(pos, d.phi(np.where(pos, g.x, 0.0)), 0.0) if d.phi is not None else np.zeros(g.nx)
    psi = np.where(pos, d.psi(np.where(pos, g.x, 0.0)), 0.0) if d.psi is not None else np.zeros(g.nx)
    uhat, _ = free_modes(InitialPair(phi, psi, half_line=True), sym, g)
    free = from_dual_x(SpectralField(g, uhat, "dual_x")).values.real
    p = _traces_from_modes(uhat, g)
    tt = g.dt * np.arange(n_b + 1)
    h = np.zeros((3, n_b + 1))
    for m, fn in enumerate(d.h):
        if fn is not None:
            h[m] = np.real(fn(tt))
    h = _mollify(h, cfg.mollify_width, g.dt)
    hs = h * eta(cfg.cutoff, tt)[None, :] - _taper_samples(ctx, p, n_b)
    ctx.h_samples = hs
    lin = np.zeros((g.nx, g.nt))
    lin[x_idx] = free[x_idx]
    if np.any(hs):
        block = _wbdr_on_grid(ctx, hs)
        lin[np.ix_(x_idx, t_idx)] += block
    ctx.linear = lin * eta_t[None, :]
    return ctx


def gamma_apply(u: np.ndarray, ctx: GammaContext) -> np.ndarray:
    """Gamma(u) for real physical values u on the grid (zero on x < 0)."""
    g = ctx.grid
    if not np.any(u):
        return ctx.linear.copy()
    f = np.zeros((g.nx, g.nt))
    f[ctx.x_index] = -(u[ctx.x_index] ** 2)
    f = reflect_extend(f, g)
    if ctx.cfg.dealias:
        f = _dealias(f, g).real
    uhat, _ = duhamel_modes(SpectralField(g, f.astype(complex), "physical"), ctx.sym)
    duh = from_dual_x(SpectralField(g, uhat, "dual_x")).values.real
    q = _traces_from_modes(uhat, g)
    _, n_b = _boundary_window(g, ctx.cfg.cutoff)
    qs = _taper_samples(ctx, q, n_b)
    out = np.zeros((g.nx, g.nt))
    out[ctx.x_index] = duh[ctx.x_index]
    if np.any(qs):
        out[np.ix_(ctx.x_index, ctx.t_index)] -= _wbdr_on_grid(ctx, qs)
    return ctx.linear + out * ctx.eta_t[None, :]


def gamma_map(u: SpectralField, d: ProblemData, sym: PhaseSymbol, cfg: SolverConfig,
              ctx: GammaContext | None = None) -> SpectralField:
    ctx = ctx or prepare_gamma(d, sym, cfg)
    vals = np.real(u.values) if u.representation == "physical" else np.real(
        from_dual_x(to_dual_x(u)).values)
    return SpectralField(cfg.grid, gamma_apply(vals, ctx).astype(complex), "physical")


# ----------------------------------------------------------------------------
# Picard iteration


@dataclass
class PicardResult:
    solution: SpectralField
    iterations: int
    contraction_ratios: list
    residual: float
    norms: dict
    sym: PhaseSymbol
    mu_max: list = field(default_factory=list)


def _cnorm(v: np.ndarray, sym: PhaseSymbol, cfg: SolverConfig) -> float:
    return composite_norm(SpectralField(cfg.grid, v.astype(complex), "physical"), sym, cfg.norm)


def hs_slice_sup(v: np.ndarray, grid: SpaceTimeGrid, s: float, t_range=(0.0, 1.0)) -> float:
    """sup over t in t_range of the zero-extension H^s proxy of u(., t) on x >= 0."""
    sel = (grid.t >= t_range[0]) & (grid.t <= t_range[1])
    pos = grid.x >= 0
    best = 0.0
    for k in np.nonzero(sel)[0]:
        best = max(best, sobolev_norm_halfline(v[pos, k], grid.dx, s))
    return best


def picard_solve(d: ProblemData, sym: PhaseSymbol, cfg: SolverConfig, ctx: GammaContext | None = None) -> PicardResult:
    """u_0 = Gamma(0), u_{n+1} = Gamma(u_n) until the composite-norm step is below rel_tol."""
    ctx = ctx or prepare_gamma(d, sym, cfg)
    pc = cfg.picard
    u = gamma_apply(np.zeros((cfg.grid.nx, cfg.grid.nt)), ctx)
    n0 = _cnorm(u, sym, cfg)
    if n0 == 0.0:
        sol = SpectralField(cfg.grid, u.astype(complex), "physical")
        return PicardResult(sol, 1, [], 0.0, {"composite": 0.0, "Hs_slice_sup": 0.0}, sym, ctx.mu_max_log)
    ratios: list[float] = []
    prev_step = None
    bad = 0
    for it in range(1, pc.max_iter + 1):
        nxt = gamma_apply(u, ctx)
        step = _cnorm(nxt - u, sym, cfg)
        size = _cnorm(nxt, sym, cfg)
        if prev_step is not None and prev_step > 0:
            r = step / prev_step
            ratios.append(r)
            bad = bad + 1 if r >= 1.0 else 0
            log.debug("picard %d: step %.3e ratio %.3f", it, step, r)
            if bad >= 3:
                raise NoContraction(f"contraction ratio >= 1 for 3 consecutive steps (last {r:.3f}); try a larger lambda")
        prev_step = step
        u = nxt
        if size == 0.0 or step <= pc.rel_tol * size:
            check = gamma_apply(u, ctx)
            residual = _cnorm(check - u, sym, cfg) / max(size, 1e-300)
            norms = {"composite": size, "Hs_slice_sup": hs_slice_sup(u, cfg.grid, cfg.s)}
            sol = SpectralField(cfg.grid, u.astype(complex), "physical")
            return PicardResult(sol, it + 1, ratios, residual, norms, sym, ctx.mu_max_log)
    raise MaxIterExceeded(f"no convergence within {pc.max_iter} Picard steps")


# ----------------------------------------------------------------------------
# full solve with the lambda ladder


@dataclass
class SolveResult:
    lam: float
    picard: PicardResult

    @property
    def alpha(self) -> float:
        return self.lam**-2

    def unscaled(self, x, t) -> np.ndarray:
        """u(x, t) = lam^4 u^lam(lam x, lam^3 t), by trigonometric interpolation of the scaled field."""
        f = to_dual(self.picard.solution)
        g = f.grid
        xs = self.lam * np.atleast_1d(np.asarray(x, dtype=float))
        ts = self.lam**3 * np.atleast_1d(np.asarray(t, dtype=float))
        ex = np.exp(1j * np.outer(xs, g.xi)) * (g.dxi / np.sqrt(2 * np.pi))
        et = np.exp(1j * np.outer(g.tau, ts)) * (g.dtau / np.sqrt(2 * np.pi))
        return self.lam**4 * (ex @ f.values @ et).real


def solve_full(d: ProblemData, cfg: SolverConfig, lam: float | None = None) -> SolveResult:
    """Smallest lambda in 1, 2, 4, ... for which Picard converges, or the forced ``lam``."""
    ladder = [lam] if lam is not None else [2.0**k for k in range(int(np.log2(cfg.lambda_max)) + 1)]
    failures = []
    for lm in ladder:
        sp = ScalingParams(lm)
        sym = PhaseSymbol(sp.alpha, cfg.beta)
        try:
            ds = rescale_data(d, sp, cfg.grid)
            res = picard_solve(ds, sym, cfg)
        except (NoContraction, MaxIterExceeded, TailTooFat, NonconvergentQuadrature, ResampleOutOfWindow) as exc:
            log.info("lambda = %g failed: %s", lm, exc)
            failures.append(f"lambda={lm:g}: {exc}")
            if lam is not None:
                raise
            continue
        return SolveResult(lm, res)
    raise LambdaExhausted("no lambda up to %g gave a contraction (%s)" % (ladder[-1], "; ".join(failures)))


# ----------------------------------------------------------------------------
# diagnostics


def fd_weights(order: int, npts: int) -> np.ndarray:
    """Central finite-difference weights on the stencil -k..k (npts = 2k + 1)."""
    k = npts // 2
    s = np.arange(-k, k + 1, dtype=float)
    rhs = np.zeros(npts)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(np.vander(s, npts, increasing=True).T, rhs)


def fd_derivative(u: np.ndarray, h: float, order: int, axis: int = 0, npts: int = 13) -> np.ndarray:
    """Central difference along ``axis``; the result is shorter by npts - 1 along it."""
    w = fd_weights(order, npts)
    n = u.shape[axis]
    out = 0.0
    for i, wi in enumerate(w):
        out = out + wi * np.take(u, np.arange(i, n - npts + 1 + i), axis=axis)
    return out / h**order


def pde_residual(u: np.ndarray, grid: SpaceTimeGrid, sym: PhaseSymbol, x_range=(0.5, 5.0), t_range=(0.1, 0.9),
                 nonlinear: bool = True, npts: int = 13) -> tuple[float, float]:
    """max |u_tt - a^2 u_xx + ab u_xxxx - u_xxxxxx + (u^2)_xx| and the largest single-term size.

    t-derivatives are spectral over the window, x-derivatives are central
    differences of order npts - 1.
    """
    k = npts // 2
    xs = np.nonzero((grid.x >= x_range[0]) & (grid.x <= x_range[1]))[0]
    lo, hi = xs[0] - k, xs[-1] + k + 1
    if lo < 0 or hi > grid.nx:
        raise ValueError("residual window too close to the box edge")
    ts = (grid.t >= t_range[0]) & (grid.t <= t_range[1])
    blk = u[lo:hi]
    utt = np.fft.ifft(-(grid.tau**2) * np.fft.fft(blk, axis=1), axis=1).real[k:-k][:, ts]
    a, ab = sym.alpha, sym.ab
    terms = [
        utt,
        -a * a * fd_derivative(blk, grid.dx, 2, 0, npts)[:, ts],
        ab * fd_derivative(blk, grid.dx, 4, 0, npts)[:, ts],
        -fd_derivative(blk, grid.dx, 6, 0, npts)[:, ts],
    ]
    if nonlinear:
        terms.append(fd_derivative(blk**2, grid.dx, 2, 0, npts)[:, ts])
    res = np.abs(sum(terms)).max()
    scale = max(float(np.abs(tm).max()) for tm in terms)
    return float(res), scale


def boundary_errors(u: np.ndarray, grid: SpaceTimeGrid, h_of_t, t_range=(0.1, 0.9), npts: int = 13) -> np.ndarray:
    """Relative L^2 errors of (u, u_xx, u_xxxx) at x = 0 against h on t_range.

    Traces use one-sided differences of order npts - 1 on the x >= 0 nodes.
    A channel whose target vanishes is measured against the largest L^2-in-t
    size of the same derivative over interior rows x > 0.
    """
    i0 = grid.i_x0
    ts = (grid.t >= t_range[0]) & (grid.t <= t_range[1])
    s = np.arange(npts, dtype=float)
    target = np.asarray(h_of_t(grid.t[ts]))
    errs = []
    for m, order in enumerate((0, 2, 4)):
        rhs = np.zeros(npts)
        rhs[order] = float(np.prod(np.arange(1, order + 1)))
        w = np.linalg.solve(np.vander(s, npts, increasing=True).T, rhs)
        trace = np.tensordot(w, u[i0:i0 + npts][:, ts], axes=(0, 0)) / grid.dx**order
        ref = np.linalg.norm(target[m])
        if ref == 0:
            interior = fd_derivative(u[i0:], grid.dx, order, 0, npts)[:, ts]
            ref = max(float(np.max(np.linalg.norm(interior, axis=1))), 1e-300)
        errs.append(np.linalg.norm(trace - target[m]) / ref)
    return np.array(errs)
