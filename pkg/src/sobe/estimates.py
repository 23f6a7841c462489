"""Numerical probes of the norm inequalities behind the contraction argument.

Every probe returns a RatioReport: measured LHS/RHS ratios along a sweep
(refinement levels, separations, time scales) with a log-log trend slope and
a verdict.  The ratios are empirical lower bounds on the true constants, so
the quantity of interest is the trend, not the absolute size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.signal import fftconvolve

from .errors import InvalidExponent
from .grids import CutoffSpec, NormSpec, SpaceTimeGrid, SpectralField, bourgain_norm, eta, japanese, sobolev_norm_line, to_dual
from .propagator import duhamel_modes
from .symbols import PhaseSymbol, phase

STABLE_SLOPE = 0.1


@dataclass(frozen=True)
class RatioReport:
    """Ratios along a sweep.

    ``levels`` are the sweep abscissae (all positive); the trend slope is the
    least-squares slope of log(ratio) against log(level).  A report whose
    every ratio is 0/0 is marked skipped and carries no verdict.
    """

    check_id: str
    params: dict
    levels: tuple
    ratios: tuple
    trend_slope: float | None = None
    verdict: str | None = None
    skipped: bool = False

    @classmethod
    def from_series(cls, check_id: str, params: dict, levels, ratios, min_levels: int = 3) -> "RatioReport":
        levels = tuple(float(v) for v in levels)
        ratios = tuple(float(r) for r in ratios)
        finite = [(lv, r) for lv, r in zip(levels, ratios) if np.isfinite(r) and r > 0]
        if not finite:
            return cls(check_id, params, levels, ratios, None, None, True)
        slope, verdict = None, None
        if len(finite) >= min_levels:
            x = np.log([lv for lv, _ in finite])
            y = np.log([r for _, r in finite])
            slope = float(np.polyfit(x, y, 1)[0])
            verdict = "stable" if slope <= STABLE_SLOPE else "growing"
        return cls(check_id, params, levels, ratios, slope, verdict, False)

    @property
    def max_ratio(self) -> float:
        vals = [r for r in self.ratios if np.isfinite(r)]
        return max(vals) if vals else float("nan")

    def growth_factors(self) -> list[float]:
        return [b / a for a, b in zip(self.ratios[:-1], self.ratios[1:])]

    def rows(self) -> list[dict]:
        """One CSV row per level."""
        return [
            {"check_id": self.check_id, **self.params, "level": lv, "ratio": r,
             "trend_slope": self.trend_slope, "verdict": self.verdict}
            for lv, r in zip(self.levels, self.ratios)
        ]


# ----------------------------------------------------------------------------
# one-dimensional calculus inequalities


def _integrate_line(fn, points) -> float:
    """int_R fn with the finite part split at ``points`` and tails on half-lines."""
    pts = np.unique(np.asarray(points, dtype=float))
    lo, hi = float(pts[0]) - 1.0, float(pts[-1]) + 1.0
    opts = dict(epsabs=0.0, epsrel=1e-11, limit=800)
    total = quad(fn, -np.inf, lo, **opts)[0] + quad(fn, hi, np.inf, **opts)[0]
    edges = np.concatenate([[lo], pts, [hi]])
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            total += quad(fn, a, b, **opts)[0]
    return float(total)


def int_tau_integral(rho1: float, rho2: float, c1: float, c2: float) -> float:
    """int dx / (<x - c1>^rho1 <x - c2>^rho2)."""
    if not rho1 > 1 or not 0 <= rho2 <= rho1:
        raise InvalidExponent("need rho1 > 1 and 0 <= rho2 <= rho1")

    def fn(x):
        return japanese(x - c1) ** -rho1 * japanese(x - c2) ** -rho2

    return _integrate_line(fn, [c1, c2, 0.5 * (c1 + c2)])


def check_lemma_int_tau(rho1: float, rho2: float, c1: float, c2: float, samples: int = 24,
                        seed: int = 0, separations=(0.0, 1.0, 10.0, 100.0)) -> RatioReport:
    """Ratio of the integral to C / <c1 - c2>^rho2.

    C is the largest value of integral * <c1 - c2>^rho2 over a seeded sample
    of centre pairs.  The report lists the normalised ratio for (c1, c2)
    followed by the sweep over ``separations`` (same midpoint); its levels
    are <separation>.
    """
    rng = np.random.default_rng(seed)
    mids = rng.uniform(-50, 50, samples)
    seps = 10 ** rng.uniform(-1, 3, samples) * rng.choice([-1, 1], samples)
    sample_vals = [int_tau_integral(rho1, rho2, m + d / 2, m - d / 2) * japanese(d) ** rho2 for m, d in zip(mids, seps)]
    const = max(sample_vals)
    mid = 0.5 * (c1 + c2)
    levels, ratios = [], []
    for d in separations:
        val = int_tau_integral(rho1, rho2, mid + d / 2, mid - d / 2) * japanese(d) ** rho2
        levels.append(float(japanese(d)))
        ratios.append(val / const)
    own = int_tau_integral(rho1, rho2, c1, c2) * japanese(c1 - c2) ** rho2 / const
    params = {"rho1": rho1, "rho2": rho2, "c1": c1, "c2": c2, "C": const, "ratio": own}
    return RatioReport.from_series("lemma_int_tau", params, levels, ratios)


_POLY_KINDS = {"quad_half": (2, 0.5), "cubic_third": (3, 1.0 / 3.0), "quad_product": (2, 1.0)}


def poly_integral(coefficients, rho: float) -> float:
    """int dx / <p(x)>^rho with coefficients listed from the leading one down."""
    c = np.asarray(coefficients, dtype=float)
    if c[0] == 0:
        raise InvalidExponent("leading coefficient must be nonzero")
    if len(c) - 1 < 1 or rho * (len(c) - 1) <= 1:
        raise InvalidExponent("the integral diverges unless rho * degree > 1")
    pts = [r.real for r in np.roots(c) if abs(r.imag) < 1e-6 * max(1.0, abs(r))]
    if len(c) > 2:
        pts += [r.real for r in np.roots(np.polyder(c)) if abs(r.imag) < 1e-6 * max(1.0, abs(r))]
    if not pts:
        pts = [0.0]

    def fn(x):
        return japanese(np.polyval(c, x)) ** -rho

    return _integrate_line(fn, pts)


def poly_bound_shape(kind: str, coefficients) -> float:
    """The coefficient-dependent factor of each bound (without C)."""
    c = np.asarray(coefficients, dtype=float)
    if kind == "quad_half":
        return abs(c[0]) ** -0.5
    if kind == "cubic_third":
        return abs(c[0]) ** (-1.0 / 3.0)
    if kind == "quad_product":
        c2, c1, c0 = c
        return abs(c2) ** -0.5 * japanese(c0 - c1 * c1 / (4 * c2)) ** -0.5
    raise ValueError(f"unknown kind {kind!r}")


def check_lemma_poly(kind: str, coefficients, rho: float, scales=(1.0, 4.0, 16.0, 64.0)) -> RatioReport:
    """integral / bound-shape for the given coefficients under the substitution x -> k^(-1/d) x.

    For each k in ``scales`` the coefficient of x^i is multiplied by k^(i/d),
    so the leading one scales by k and the integral by k^(-1/d).  The ratio
    (the empirical constant C) is invariant under this substitution.
    """
    if kind not in _POLY_KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    degree, rho_min = _POLY_KINDS[kind]
    c = np.asarray(coefficients, dtype=float)
    if len(c) != degree + 1:
        raise ValueError(f"{kind} needs {degree + 1} coefficients")
    if c[0] == 0:
        raise InvalidExponent("leading coefficient must be nonzero")
    if not rho > rho_min:
        raise InvalidExponent(f"{kind} needs rho > {rho_min:.4g}")
    ratios = []
    for k in scales:
        powers = np.arange(degree, -1, -1)
        ck = c * float(k) ** (powers / degree)
        ratios.append(poly_integral(ck, rho) / poly_bound_shape(kind, ck))
    params = {"kind": kind, "coefficients": [float(v) for v in c], "rho": rho}
    return RatioReport.from_series(f"lemma_{kind}", params, scales, ratios)


# ----------------------------------------------------------------------------
# Kato smoothing and the Duhamel bound


def random_forcing(grid: SpaceTimeGrid, seed: int, xi_band: float = 2.5, tau_band: float = 8.0,
                   lattice: SpaceTimeGrid | None = None) -> SpectralField:
    """Real band-limited forcing, identical as a function on every refinement of ``lattice``.

    Coefficients live on the dual lattice of ``lattice`` (default: ``grid``)
    inside |xi| <= xi_band, |tau| <= tau_band, and are synthesised directly
    at the nodes of ``grid``.
    """
    base = lattice or grid
    if (base.x_extent, base.t_extent) != (grid.x_extent, grid.t_extent):
        raise ValueError("refinements must share the box")
    rng = np.random.default_rng(seed)
    kx = np.arange(-int(xi_band / base.dxi), int(xi_band / base.dxi) + 1)
    kt = np.arange(-int(tau_band / base.dtau), int(tau_band / base.dtau) + 1)
    coef = rng.standard_normal((kx.size, kt.size)) + 1j * rng.standard_normal((kx.size, kt.size))
    ex = np.exp(1j * np.outer(grid.x, kx * base.dxi))
    et = np.exp(1j * np.outer(kt * base.dtau, grid.t))
    vals = (ex @ coef @ et).real / np.sqrt(kx.size * kt.size)
    return SpectralField(grid, vals.astype(complex), "physical")


def _forcing_norm(f: SpectralField, sym: PhaseSymbol, s: float, b: float) -> float:
    """|| (xi^2 fhat / phase)^vee ||_{X^{s, b}}."""
    g = f.grid
    fd = to_dual(f).values
    ph = phase(sym, g.xi)
    mult = np.where(ph > 0, g.xi**2 / np.where(ph > 0, ph, 1.0), 0.0)
    return bourgain_norm(SpectralField(g, mult[:, None] * fd, "dual"), sym, NormSpec(s=s, b=b, variant="bourgain"))


def kato_lhs(f: SpectralField, sym: PhaseSymbol, j: int, s: float, cutoff: CutoffSpec = CutoffSpec()) -> float:
    """|| eta(t) d_x^j Duhamel(f)(0, t) ||_{H_t^{(s - j + 1)/3}}."""
    g = f.grid
    uhat, _ = duhamel_modes(f, sym)
    xi = g.xi.copy()
    if j % 2:
        xi[g.nx // 2] = 0.0
    trace = (g.dxi / np.sqrt(2 * np.pi)) * ((1j * xi) ** j @ uhat)
    return sobolev_norm_line(eta(cutoff, g.t) * trace, g.dt, (s - j + 1) / 3.0)


def kato_ratio(j: int, s: float, sigma: float, grids, n_samples: int = 20, seed: int = 0,
               sym: PhaseSymbol = PhaseSymbol(1.0, 1)) -> RatioReport:
    """Max over seeded forcings of LHS/RHS at each refinement in ``grids``.

    RHS = || (xi^2 fhat / phase)^vee ||_{X^{s+2, sigma-1}}.  The same forcings
    (as functions) are used on every grid; levels are nx / nx_coarsest.
    """
    if j not in range(6):
        raise InvalidExponent("j must be in 0..5")
    if not -1 <= s <= 0 or not sigma > 0.5:
        raise InvalidExponent("need -1 <= s <= 0 and sigma > 1/2")
    grids = list(grids)
    ratios = []
    for g in grids:
        best = 0.0
        for k in range(n_samples):
            f = random_forcing(g, seed + k, lattice=grids[0])
            rhs = _forcing_norm(f, sym, s + 2, sigma - 1)
            if rhs == 0:
                continue
            best = max(best, kato_lhs(f, sym, j, s) / rhs)
        ratios.append(best if best > 0 else float("nan"))
    levels = [g.nx / grids[0].nx for g in grids]
    return RatioReport.from_series("kato", {"j": j, "s": s, "sigma": sigma, "samples": n_samples}, levels, ratios)


def duhamel_ratio(s: float, b: float, b_prime: float, grid: SpaceTimeGrid, times=(1.0, 0.5, 0.25),
                  n_samples: int = 8, seed: int = 0, sym: PhaseSymbol = PhaseSymbol(1.0, 1),
                  lattice: SpaceTimeGrid | None = None) -> RatioReport:
    """Max over seeded forcings of
    || eta(t/T) Duhamel(f) ||_{X^{s,b}} / (T^{1+b'-b} || (xi^2 fhat/phase)^vee ||_{X^{s,b'}}).

    Levels are 1/T.
    """
    if not (-0.5 < b_prime <= 0 <= b <= b_prime + 1):
        raise InvalidExponent("need -1/2 < b' <= 0 <= b <= b' + 1")
    if any(not 0 < T <= 1 for T in times):
        raise InvalidExponent("need 0 < T <= 1")
    cut = CutoffSpec()
    best = np.zeros(len(times))
    for k in range(n_samples):
        f = random_forcing(grid, seed + k, lattice=lattice)
        rhs = _forcing_norm(f, sym, s, b_prime)
        if rhs == 0:
            continue
        uhat, _ = duhamel_modes(f, sym)
        for i, T in enumerate(times):
            w = SpectralField(grid, uhat * eta(cut, grid.t / T)[None, :], "dual_x")
            lhs = bourgain_norm(w, sym, NormSpec(s=s, b=b, variant="bourgain"))
            best[i] = max(best[i], lhs / (T ** (1 + b_prime - b) * rhs))
    ratios = [r if r > 0 else float("nan") for r in best]
    params = {"s": s, "b": b, "b_prime": b_prime, "samples": n_samples, "nx": grid.nx, "nt": grid.nt}
    return RatioReport.from_series("duhamel", params, [1.0 / T for T in times], ratios)


# ----------------------------------------------------------------------------
# bilinear constant on a (xi, tau) lattice


@dataclass(frozen=True)
class SweepConfig:
    s_list: tuple = (-0.7, -0.9)
    sigma_list: tuple = (0.505,)
    levels: tuple = (64, 128, 256)
    dxi: float = 0.125
    tau_cells_per_radius: float = 8.0
    samples: int = 2
    iters: int = 30
    seed: int = 0
    alpha: float = 1.0
    beta: int = -1

    def __post_init__(self):
        for sg in self.sigma_list:
            if not 0.5 < sg < 1:
                raise InvalidExponent("sigma must lie in (1/2, 1)")
        if len(self.levels) < 3:
            raise ValueError("a refinement trend needs at least 3 levels")

    def lattice(self, level: int, s: float, sigma: float) -> "BilinearLattice":
        """Level n covers |xi| <= n dxi / 2 with tau spacing (radius) / tau_cells_per_radius."""
        radius = level * self.dxi / 2
        return BilinearLattice(radius, self.dxi, radius / self.tau_cells_per_radius, -s, sigma, self.alpha, self.beta)


@dataclass
class BilinearLattice:
    """Weights of the reduced trilinear form on |xi| <= radius, |tau| <= radius^3 + alpha radius + 8.

    With rho = -s, f_1, f_2 enter through a = <xi>^rho / M and the output
    through c = xi^2 / (phase <xi>^(rho - 2) <L>^(1 - sigma)), where
    L = |tau| - |xi|^3 - (alpha beta / 2)|xi| and M = <L>^(1/2) + chi_{|xi|<=1} <L>^sigma.
    """

    radius: float
    dxi: float
    dtau: float
    rho: float
    sigma: float
    alpha: float = 1.0
    beta: int = -1
    a: np.ndarray = field(init=False, repr=False)
    c: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nx = int(round(self.radius / self.dxi))
        nt = int(np.ceil((self.radius**3 + self.alpha * self.radius + 8) / self.dtau))
        self.xi = np.arange(-nx, nx + 1) * self.dxi
        self.tau = np.arange(-nt, nt + 1) * self.dtau
        X, T = np.meshgrid(self.xi, self.tau, indexing="ij")
        L = np.abs(T) - np.abs(X) ** 3 - 0.5 * self.alpha * self.beta * np.abs(X)
        M = japanese(L) ** 0.5 + (np.abs(X) <= 1) * japanese(L) ** self.sigma
        self.a = japanese(X) ** self.rho / M
        ph = phase(PhaseSymbol(self.alpha, self.beta), X)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(ph > 0, X**2 / np.where(ph > 0, ph, 1.0), 0.0)
        self.c = ratio / japanese(X) ** (self.rho - 2) / japanese(L) ** (1 - self.sigma)

    @property
    def shape(self) -> tuple[int, int]:
        return self.a.shape

    @property
    def cell(self) -> float:
        return self.dxi * self.dtau

    def normalise(self, f: np.ndarray) -> np.ndarray:
        n = np.sqrt(np.sum(f * f) * self.cell)
        return f / n if n > 0 else f

    def conv(self, g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
        """(g1 * g2)(P) = sum_Q g1(Q) g2(P - Q) on the lattice, cropped to its window."""
        full = fftconvolve(g1, g2)
        n, m = g1.shape
        return full[(n - 1) // 2:(n - 1) // 2 + n, (m - 1) // 2:(m - 1) // 2 + m] * self.cell

    def corr(self, h: np.ndarray, g: np.ndarray) -> np.ndarray:
        """sum_P h(P) g(P - Q)."""
        return self.conv(h, g[::-1, ::-1])

    def value(self, f1: np.ndarray, f2: np.ndarray) -> float:
        """sup over unit f3 of the trilinear form, i.e. || c (a f1 * a f2) ||_{L^2}."""
        p = self.c * self.conv(self.a * f1, self.a * f2)
        return float(np.sqrt(np.sum(p * p) * self.cell))

    def embed(self, f: np.ndarray, other: "BilinearLattice") -> np.ndarray:
        """Zero-pad a function from a smaller lattice with the same spacings."""
        if not (np.isclose(other.dxi, self.dxi) and np.isclose(other.dtau, self.dtau)):
            raise ValueError("nested lattices must share spacings")
        out = np.zeros(self.shape)
        n0 = (self.shape[0] - other.shape[0]) // 2
        m0 = (self.shape[1] - other.shape[1]) // 2
        if n0 < 0 or m0 < 0:
            raise ValueError("the other lattice is larger")
        out[n0:n0 + other.shape[0], m0:m0 + other.shape[1]] = f
        return out

    def maximise(self, f1: np.ndarray, f2: np.ndarray, iters: int):
        """Alternating exact maximisation; the value never decreases."""
        f1, f2 = self.normalise(f1), self.normalise(f2)
        for _ in range(iters):
            f3 = self.normalise(self.c * self.conv(self.a * f1, self.a * f2))
            h = self.c * f3
            f1 = self.normalise(self.a * self.corr(h, self.a * f2))
            f2 = self.normalise(self.a * self.corr(h, self.a * f1))
        return self.value(f1, f2), f1, f2


@dataclass(frozen=True)
class BilinearResult:
    constant: float
    lattice: BilinearLattice = field(repr=False)
    f1: np.ndarray = field(repr=False)
    f2: np.ndarray = field(repr=False)


def bilinear_constant(s: float, sigma: float, level: int, cfg: SweepConfig = SweepConfig(),
                      warm: BilinearResult | None = None, lattice: BilinearLattice | None = None) -> BilinearResult:
    """Empirical constant of the bilinear estimate at one lattice level.

    Random nonnegative unit-norm starts are refined by alternating
    maximisation.  A ``warm`` result from a nested smaller lattice with the
    same spacings is embedded and refined as an extra start, which makes the
    constant nondecreasing in the radius.
    """
    if not 0.5 < sigma < 1:
        raise InvalidExponent("sigma must lie in (1/2, 1)")
    lat = lattice or cfg.lattice(level, s, sigma)
    rng = np.random.default_rng(cfg.seed)
    best = None
    starts = [(rng.random(lat.shape), rng.random(lat.shape)) for _ in range(cfg.samples)]
    if warm is not None:
        starts.append((lat.embed(warm.f1, warm.lattice), lat.embed(warm.f2, warm.lattice)))
    for f1, f2 in starts:
        val, g1, g2 = lat.maximise(f1, f2, cfg.iters)
        if best is None or val > best.constant:
            best = BilinearResult(val, lat, g1, g2)
    return best


def bilinear_sweep(cfg: SweepConfig = SweepConfig()) -> list[RatioReport]:
    """One report per (s, sigma): constants over the refinement levels."""
    reports = []
    for s in cfg.s_list:
        for sigma in cfg.sigma_list:
            consts = [bilinear_constant(s, sigma, n, cfg).constant for n in cfg.levels]
            params = {"s": s, "sigma": sigma, "dxi": cfg.dxi, "samples": cfg.samples, "iters": cfg.iters}
            reports.append(RatioReport.from_series("bilinear", params, cfg.levels, consts))
    return reports
