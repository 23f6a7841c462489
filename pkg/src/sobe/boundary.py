"""Boundary operator W_bdr(h1, h2, h3) on the quarter plane.

The solution with zero initial data and boundary values
u(0,t) = h1, u_xx(0,t) = h2, u_xxxx(0,t) = h3 is written as a Bromwich
integral in the Laplace variable rho,

    u(x, t) = (1 / 2 pi i) int e^{rho t} sum_j c_j(rho) e^{gamma_j(rho) x} d rho,

where c_j solve the Vandermonde system in gamma_j^2.  The vertical line is
deformed to a short rectangular detour (the contour part, |Im rho| <= H) and
the imaginary axis beyond +-iH, parametrised by rho = +-i phase(mu), mu >= 1
(the oscillatory part).  With H = phase(1) the two pieces meet exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from .errors import AliasingWarning, NonconvergentQuadrature, TailTooFat
from .symbols import ContourPath, PhaseSymbol, contour_kernel, oscillatory_kernel, phase

_GL16 = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class BoundaryTriple:
    """Boundary data (h1, h2, h3) on [0, t_end].

    Either three callables of t (``dt`` is None) or three sample arrays on
    t_k = k dt, k = 0..N with N dt = t_end.  ``None`` marks a zero channel.
    """

    channels: tuple
    t_end: float
    dt: float | None = None
    s: float | None = None

    def __post_init__(self):
        if len(self.channels) != 3:
            raise ValueError("boundary data needs exactly three channels")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.dt is not None:
            n = int(round(self.t_end / self.dt))
            if abs(n * self.dt - self.t_end) > 1e-9 * self.t_end:
                raise ValueError("t_end must be a multiple of dt")
            for ch in self.channels:
                if ch is not None and np.shape(ch) != (n + 1,):
                    raise ValueError(f"sampled channel must have {n + 1} values")

    @property
    def sobolev_indices(self):
        if self.s is None:
            return None
        return ((self.s + 1) / 3, (self.s - 1) / 3, (self.s - 3) / 3)

    @property
    def band_limit(self) -> float:
        """Largest resolved angular frequency (infinite for callables)."""
        return np.inf if self.dt is None else np.pi / self.dt

    @property
    def is_zero(self) -> bool:
        if all(ch is None for ch in self.channels):
            return True
        if self.dt is not None:
            return all(ch is None or not np.any(ch) for ch in self.channels)
        return False

    @classmethod
    def zeros(cls, t_end: float = 1.0) -> "BoundaryTriple":
        return cls((None, None, None), t_end)

    def evaluate(self, t) -> np.ndarray:
        """Channel values at times t (zero outside [0, t_end]); shape (3, len(t))."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((3, t.size))
        inside = (t >= 0) & (t <= self.t_end)
        for m, ch in enumerate(self.channels):
            if ch is None:
                continue
            if self.dt is None:
                out[m, inside] = np.real(ch(t[inside]))
            else:
                grid = self.dt * np.arange(len(ch))
                out[m, inside] = np.interp(t[inside], grid, np.real(ch))
        return out

    def scaled(self, factors: Sequence[float]) -> "BoundaryTriple":
        chans = []
        for f, ch in zip(factors, self.channels):
            if ch is None:
                chans.append(None)
            elif self.dt is None:
                chans.append(lambda t, f=f, ch=ch: f * ch(t))
            else:
                chans.append(f * np.asarray(ch))
        return BoundaryTriple(tuple(chans), self.t_end, self.dt, self.s)

    def transform(self, rho, rel_tol: float = 1e-10, max_panels: int = 1 << 16) -> np.ndarray:
        """Laplace transforms h~_m(rho) = int_0^{t_end} e^{-rho t} h_m(t) dt; shape (3, len(rho))."""
        rho = np.atleast_1d(np.asarray(rho, dtype=complex))
        out = np.zeros((3, rho.size), dtype=complex)
        for m, ch in enumerate(self.channels):
            if ch is None:
                continue
            if self.dt is None:
                out[m] = _laplace_callable(ch, rho, self.t_end, rel_tol, max_panels)
            else:
                out[m] = _laplace_sampled(np.asarray(ch, dtype=complex), self.dt, rho)
        return out


def _gl_composite(a: float, b: float, panels: int):
    x, w = _GL16
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _laplace_callable(h: Callable, rho: np.ndarray, t_end: float, rel_tol: float, max_panels: int) -> np.ndarray:
    """Composite Gauss-Legendre; panel count doubled until the result settles."""
    freq = float(np.max(np.abs(rho.imag))) if rho.size else 0.0
    panels = max(8, int(np.ceil(freq * t_end / np.pi)))

    def run(p):
        t, w = _gl_composite(0.0, t_end, p)
        vals = np.asarray(h(t), dtype=complex) * w
        out = np.empty(rho.size, dtype=complex)
        for lo in range(0, rho.size, 512):
            out[lo:lo + 512] = np.exp(-np.outer(rho[lo:lo + 512], t)) @ vals
        return out

    tt, ww = _gl_composite(0.0, t_end, panels)
    l1 = float(np.sum(np.abs(h(tt)) * ww))  # |h~(rho)| <= ||h||_1 for Re rho >= 0
    cur = run(panels)
    while True:
        nxt = run(2 * panels)
        scale = max(float(np.max(np.abs(nxt))), l1, 1e-300)
        if np.max(np.abs(nxt - cur)) <= rel_tol * scale:
            return nxt
        panels *= 2
        if panels > max_panels:
            raise NonconvergentQuadrature("Laplace transform did not settle under panel doubling")
        cur = nxt


def _laplace_sampled(g: np.ndarray, dt: float, rho: np.ndarray) -> np.ndarray:
    """Trapezoidal rule, i.e. the exact transform of the band-limited interpolant.

    Spectrally accurate for smooth data that vanish to high order at both
    ends; frequencies above the Nyquist limit pi/dt are set to zero.
    """
    n = g.size
    t = dt * np.arange(n)
    w = np.full(n, dt)
    w[0] = w[-1] = 0.5 * dt
    gw = g * w
    out = np.empty(rho.size, dtype=complex)
    for lo in range(0, rho.size, 512):
        out[lo:lo + 512] = np.exp(-np.outer(rho[lo:lo + 512], t)) @ gw
    out[np.abs(rho.imag) > np.pi / dt] = 0.0
    return out


def laplace_boundary_transform(h, rho: complex, t_end: float = 1.0, dt: float | None = None) -> complex:
    """h~(rho) for a single channel given as a callable or as samples on k*dt."""
    bt = BoundaryTriple((h, None, None), t_end, dt)
    return complex(bt.transform(np.array([rho]))[0, 0])


def oscillatory_boundary_transform(h, sym: PhaseSymbol, mu: float, t_end: float = 1.0, dt: float | None = None) -> complex:
    """h~+(mu) = h~(i phase(mu))."""
    if mu < 1:
        raise ValueError("mu must be >= 1")
    return laplace_boundary_transform(h, 1j * phase(sym, mu), t_end, dt)


# ----------------------------------------------------------------------------
# configuration and mu range


@dataclass(frozen=True)
class BoundaryConfig:
    contour_orders: tuple = (48, 48, 48)
    contour_width: float = 1.0
    mu_rel_tol: float = 1e-8
    mu_cap: float = 200.0
    mu_scan_step: float = 0.05
    tail_tol: float = 1e-6
    nodes_per_period: int = 8
    quad_scale: int = 1
    mu_max: float | None = None  # fixed value overrides the tail rule

    def doubled(self) -> "BoundaryConfig":
        return BoundaryConfig(
            contour_orders=tuple(2 * o for o in self.contour_orders),
            contour_width=self.contour_width,
            mu_rel_tol=self.mu_rel_tol,
            mu_cap=self.mu_cap,
            mu_scan_step=self.mu_scan_step,
            tail_tol=self.tail_tol,
            nodes_per_period=self.nodes_per_period,
            quad_scale=2 * self.quad_scale,
            mu_max=self.mu_max,
        )


@dataclass
class MuRange:
    mu_max: float
    tail_estimate: float
    profile_mu: np.ndarray = field(repr=False)
    profile: np.ndarray = field(repr=False)


def _osc_amplitude(sym: PhaseSymbol, h: BoundaryTriple, mu: np.ndarray):
    """Sum_m |h~+_m| and the x = 0 integrand magnitude used for tail estimates."""
    ht = h.transform(1j * phase(sym, mu))
    _, kern = oscillatory_kernel(sym, mu)
    dphi = sym.derivative(mu)
    amp = np.sum(np.abs(ht), axis=0)
    integrand = np.abs(np.einsum("kjm,mk->k", kern, ht)) * dphi
    return amp, integrand


def select_mu_max(h: BoundaryTriple, sym: PhaseSymbol, cfg: BoundaryConfig = BoundaryConfig()) -> MuRange:
    """Smallest mu with sum_m |h~+_m(mu)| < tol * (value at mu = 1), capped at mu_cap.

    The profile is scanned in blocks; a candidate is accepted once the
    amplitude stays below the threshold over a further 25% of mu.
    """
    if cfg.mu_max is not None:
        mu = np.linspace(1.0, cfg.mu_max, 16)
        return MuRange(cfg.mu_max, 0.0, mu, np.zeros_like(mu))
    step = cfg.mu_scan_step
    cap = cfg.mu_cap
    band_capped = False
    if np.isfinite(h.band_limit):
        band_cap = mu_of_phase(sym, h.band_limit)
        band_capped = band_cap < cap
        cap = min(cap, band_cap)
    if cap <= 1.0:
        raise TailTooFat("boundary samples are too coarse to resolve phase(1)")
    mus, amps, ints = [], [], []
    lo = 1.0
    ref = None
    candidate = None
    while lo < cap:
        hi = min(cap, lo + max(1.0, 0.5 * lo))
        block = np.arange(lo, hi, step) if not mus else np.arange(lo + step, hi + 0.5 * step, step)
        block = block[block <= cap]
        if block.size == 0:
            break
        amp, integ = _osc_amplitude(sym, h, block)
        mus.append(block)
        amps.append(amp)
        ints.append(integ)
        lo = float(block[-1])
        mu_all = np.concatenate(mus)
        amp_all = np.concatenate(amps)
        if ref is None:
            ref = max(float(amp_all[0]), 1e-300)
        above = np.nonzero(amp_all >= cfg.mu_rel_tol * ref)[0]
        first_below = mu_all[above[-1] + 1] if above.size and above[-1] + 1 < mu_all.size else (
            mu_all[0] if not above.size else None)
        if first_below is not None and mu_all[-1] >= 1.25 * first_below:
            candidate = float(first_below)
            break
    mu_all = np.concatenate(mus)
    amp_all = np.concatenate(amps)
    int_all = np.concatenate(ints)
    capped = candidate is None
    if capped:
        candidate = float(mu_all[-1])
    inside = mu_all <= candidate
    total = trapezoid(int_all[inside], mu_all[inside]) if inside.sum() > 1 else 0.0
    tail = trapezoid(int_all[~inside], mu_all[~inside]) if (~inside).sum() > 1 else 0.0
    if capped and amp_all[-1] >= cfg.mu_rel_tol * (ref or 1.0):
        # the profile never dropped: extrapolate the last level over a further quarter
        tail += float(int_all[-1]) * 0.25 * candidate
    tail_rel = tail / total if total > 0 else 0.0
    if capped and band_capped:
        # sampled data have no content above pi/dt; the share of the top tenth
        # below the cap measures how well the sampling resolves the data
        top = mu_all >= 0.9 * candidate
        tail_rel = (trapezoid(int_all[top], mu_all[top]) / total) if total > 0 and top.sum() > 1 else 0.0
        if tail_rel > cfg.tail_tol:
            warnings.warn(f"boundary samples near the band limit carry {tail_rel:.2e} of the integral",
                          AliasingWarning)
        return MuRange(candidate, tail_rel, mu_all, amp_all)
    if tail_rel > cfg.tail_tol:
        raise TailTooFat(f"estimated tail beyond mu = {candidate:.3g} is {tail_rel:.2e} of the integral")
    return MuRange(candidate, tail_rel, mu_all, amp_all)


def mu_of_phase(sym: PhaseSymbol, omega: float) -> float:
    """Inverse of phase on mu >= 0."""
    if omega <= 0:
        return 0.0
    hi = max(1.0, omega ** (1.0 / 3.0))
    while phase(sym, hi) < omega:
        hi *= 2
    return float(brentq(lambda m: phase(sym, m) - omega, 0.0, hi, xtol=1e-14, rtol=1e-14))


def oscillatory_nodes(sym: PhaseSymbol, mu_max: float, t_max: float, x_max: float, t_end: float,
                      nodes_per_period: int = 8, scale: int = 1, max_nodes: int = 400_000):
    """Composite Gauss-Legendre nodes on [1, mu_max] resolving e^{i phase t}, e^{gamma x} and h~+."""
    if mu_max <= 1.0:
        return np.zeros(0), np.zeros(0)
    edges = [1.0]
    per_panel = 16
    while edges[-1] < mu_max:
        if len(edges) * per_panel > max_nodes:
            raise NonconvergentQuadrature(f"more than {max_nodes} nodes needed up to mu = {mu_max:.3g}")
        m = edges[-1]
        # local phase rate, bounded over the next panel by evaluating at a generous right end
        guess = m + 1.0
        for _ in range(3):
            rate = float(sym.derivative(guess)) * (abs(t_max) + t_end) + 0.6 * abs(x_max) + 1.0
            width = (per_panel / nodes_per_period) * 2 * np.pi / rate / scale
            guess = m + width
        edges.append(min(mu_max, m + width))
    edges = np.array(edges)
    x, w = _GL16
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


# ----------------------------------------------------------------------------
# evaluation


def _assemble(gam: np.ndarray, coef: np.ndarray, tfac: np.ndarray, x: np.ndarray, order: int = 0) -> np.ndarray:
    """sum_k sum_j gamma_jk^order e^{gamma_jk x} coef_jk tfac_kt, via three matrix products."""
    out = np.zeros((x.size, tfac.shape[1]), dtype=complex)
    for lo in range(0, gam.shape[0], 4096):
        sl = slice(lo, lo + 4096)
        for j in range(3):
            A = np.exp(np.outer(x, gam[sl, j]))
            out += A @ ((gam[sl, j] ** order * coef[sl, j])[:, None] * tfac[sl])
    return out


def wbdr_contour(h: BoundaryTriple, sym: PhaseSymbol, path: ContourPath, x, t, scale: int = 1,
                 order: int = 0) -> np.ndarray:
    """(1 / 2 pi i) int_path e^{rho t} sum_j c_j e^{gamma_j x} d rho, complex, shape (len(x), len(t))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(x < 0):
        raise ValueError("W_bdr is evaluated on x >= 0 only")
    if h.is_zero:
        return np.zeros((x.size, t.size), dtype=complex)
    rho, w = path.nodes(scale)
    gam, kern = contour_kernel(sym, rho)
    ht = h.transform(rho)  # (3, k)
    coef = np.einsum("kjm,mk->kj", kern, ht)
    tfac = (w / (2j * np.pi))[:, None] * np.exp(np.outer(rho, t))
    return _assemble(gam, coef, tfac, x, order)


def wbdr_oscillatory(h: BoundaryTriple, sym: PhaseSymbol, mu_max: float, x, t, nodes_per_period: int = 8,
                     scale: int = 1, return_pair: bool = False, order: int = 0):
    """I + conj(I) over rho = +-i phase(mu), 1 <= mu <= mu_max.

    I = (1 / 2 pi) int e^{i phase t} sum_j c_j+ e^{gamma_j+ x} phase'(mu) d mu.
    Returns the real sum, or (I, conj(I)) with ``return_pair``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(x < 0):
        raise ValueError("W_bdr is evaluated on x >= 0 only")
    if h.is_zero or mu_max <= 1.0:
        z = np.zeros((x.size, t.size), dtype=complex)
        return (z, z) if return_pair else z.real
    t_max = float(np.max(np.abs(t))) if t.size else 0.0
    x_max = float(np.max(x)) if x.size else 0.0
    mu, w = oscillatory_nodes(sym, mu_max, t_max, x_max, h.t_end, nodes_per_period, scale)
    gam, kern = oscillatory_kernel(sym, mu)
    ph = phase(sym, mu)
    ht = h.transform(1j * ph)
    coef = np.einsum("kjm,mk->kj", kern, ht)
    tfac = (w * sym.derivative(mu) / (2 * np.pi))[:, None] * np.exp(1j * np.outer(ph, t))
    val = _assemble(gam, coef, tfac, x, order)
    if return_pair:
        return val, np.conj(val)
    return 2.0 * val.real


def _contour_abs_scale(h: BoundaryTriple, sym: PhaseSymbol, path: ContourPath, t: np.ndarray, order: int) -> float:
    rho, w = path.nodes()
    gam, kern = contour_kernel(sym, rho)
    coef = np.einsum("kjm,mk->kj", kern, h.transform(rho))
    t_max = float(np.max(t)) if t.size else 0.0
    mag = np.abs(w)[:, None] * np.abs(coef * gam**order) * np.exp(rho.real * t_max)[:, None]
    return float(np.sum(mag)) / (2 * np.pi)


@dataclass
class WbdrResult:
    values: np.ndarray = field(repr=False)  # real, (len(x), len(t))
    mu_max: float = 1.0
    tail_estimate: float = 0.0
    imag_ratio: float = 0.0


def wbdr_total(h: BoundaryTriple, sym: PhaseSymbol, x, t, cfg: BoundaryConfig = BoundaryConfig(),
               causal: bool = True, order: int = 0, mu_range: MuRange | None = None) -> WbdrResult:
    """W_bdr(h) (or its x-derivative of the given order) at x >= 0; zero for t < 0 when ``causal``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((x.size, t.size))
    if h.is_zero:
        return WbdrResult(out)
    sel = t >= 0 if causal else np.ones(t.size, dtype=bool)
    ts = t[sel]
    path = ContourPath.standard(sym, cfg.contour_width, cfg.contour_orders)
    mr = mu_range or select_mu_max(h, sym, cfg)
    cont = wbdr_contour(h, sym, path, x, ts, cfg.quad_scale, order)
    osc = wbdr_oscillatory(h, sym, mr.mu_max, x, ts, cfg.nodes_per_period, cfg.quad_scale, order=order)
    total = cont + osc
    # realness is measured against the absolute size of the contour integrand
    scale = max(float(np.max(np.abs(cont))), float(np.max(np.abs(osc))),
                _contour_abs_scale(h, sym, path, ts, order), 1e-300)
    imag_ratio = float(np.max(np.abs(total.imag))) / scale
    if imag_ratio > 1e-8:
        raise NonconvergentQuadrature(f"boundary operator output not real: imag/scale = {imag_ratio:.2e}")
    out[:, sel] = total.real
    return WbdrResult(out, mr.mu_max, mr.tail_estimate, imag_ratio)
