"""Whole-line free evolution, the Duhamel integral and traces at x = 0."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AliasingWarning, RepresentationMismatch
from .filon import cumulative_filon
from .grids import SpaceTimeGrid, SpectralField, from_dual_x, line_transform, to_dual_x
from .symbols import PhaseSymbol, phase

TRACE_ORDERS = (0, 2, 4)


@dataclass(frozen=True)
class InitialPair:
    """u(x, 0) = phi, u_t(x, 0) = psi''.  Samples on grid.x.

    With ``half_line`` set, values at x < 0 are replaced by zero (phi*, psi*).
    """

    phi: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    half_line: bool = True

    def extended(self, grid: SpaceTimeGrid) -> tuple[np.ndarray, np.ndarray]:
        phi = np.asarray(self.phi, dtype=complex)
        psi = np.asarray(self.psi, dtype=complex)
        if phi.shape != (grid.nx,) or psi.shape != (grid.nx,):
            raise RepresentationMismatch("initial data must be sampled on grid.x")
        if self.half_line:
            neg = grid.x < 0
            phi = np.where(neg, 0.0, phi)
            psi = np.where(neg, 0.0, psi)
        return phi, psi

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid) -> "InitialPair":
        return cls(np.zeros(grid.nx), np.zeros(grid.nx))


@dataclass(frozen=True)
class TraceTriple:
    """(g1, g2, g3) = (u, u_xx, u_xxxx) at x = 0 on a common time grid."""

    t: np.ndarray = field(repr=False)
    g1: np.ndarray = field(repr=False)
    g2: np.ndarray = field(repr=False)
    g3: np.ndarray = field(repr=False)

    def as_array(self) -> np.ndarray:
        return np.stack([self.g1, self.g2, self.g3])

    def __sub__(self, other: "TraceTriple") -> "TraceTriple":
        return TraceTriple(self.t, self.g1 - other.g1, self.g2 - other.g2, self.g3 - other.g3)


def velocity_multiplier(sym: PhaseSymbol, xi) -> np.ndarray:
    """m(xi) = -xi^2 / phase(xi), with m(0) = 0."""
    xi = np.asarray(xi, dtype=float)
    ph = phase(sym, xi)
    return np.where(ph > 0, -(xi**2) / np.where(ph > 0, ph, 1.0), 0.0)


def free_modes(data: InitialPair, sym: PhaseSymbol, grid: SpaceTimeGrid, times=None):
    """Mode amplitudes and time derivatives: (uhat, uhat_t), each shape (nx, len(times))."""
    times = grid.t if times is None else np.asarray(times, dtype=float)
    phi, psi = data.extended(grid)
    _, f1 = line_transform(phi, grid.dx, -grid.x_extent)
    _, f2 = line_transform(psi, grid.dx, -grid.x_extent)
    ph = phase(sym, grid.xi)[:, None]
    m = velocity_multiplier(sym, grid.xi)[:, None]
    c, s = np.cos(ph * times), np.sin(ph * times)
    u = c * f1[:, None] + s * m * f2[:, None]
    ut = -ph * s * f1[:, None] + ph * c * m * f2[:, None]
    return u, ut


def free_evolution(data: InitialPair, sym: PhaseSymbol, grid: SpaceTimeGrid) -> SpectralField:
    """W_R(phi*, psi*) on the full grid, returned in physical representation."""
    u, _ = free_modes(data, sym, grid)
    return from_dual_x(SpectralField(grid, u, "dual_x"))


def _forward_duhamel(g: np.ndarray, ph: np.ndarray, dt: float):
    """int_0^t sin(ph (t - t')) / ph * g(t') dt' and its t-derivative for t = k dt, k >= 0."""
    n = g.shape[1]
    t = dt * np.arange(n)
    a = cumulative_filon(g, -ph, dt)
    b = cumulative_filon(g, ph, dt)
    ep = np.exp(1j * ph[:, None] * t[None, :])
    em = np.conj(ep)
    safe = np.where(ph > 0, ph, 1.0)[:, None]
    u = (ep * a - em * b) / (2j * safe)
    ut = 0.5 * (ep * a + em * b)
    # ph = 0 only at xi = 0, where the forcing -xi^2 fhat vanishes identically
    zero = ph == 0
    u[zero] = 0.0
    ut[zero] = 0.0
    return u, ut


def duhamel_modes(forcing: SpectralField, sym: PhaseSymbol):
    """Per-mode Duhamel amplitudes (uhat, uhat_t) in the (xi, t) representation.

    Solves uhat_tt + phase^2 uhat = -xi^2 fhat with zero data at t = 0, for
    t >= 0 and (by time reversal) t < 0.
    """
    grid = forcing.grid
    fx = to_dual_x(forcing).values
    g = -(grid.xi**2)[:, None] * fx
    ph = phase(sym, grid.xi)
    i0 = grid.i_t0
    u = np.zeros_like(g)
    ut = np.zeros_like(g)
    fu, fut = _forward_duhamel(g[:, i0:], ph, grid.dt)
    u[:, i0:], ut[:, i0:] = fu, fut
    back = g[:, i0::-1]
    if back.shape[1] >= 5:
        bu, but = _forward_duhamel(back, ph, grid.dt)
        u[:, i0::-1] = bu
        ut[:, i0::-1] = -but
    return u, ut


def duhamel(forcing: SpectralField, sym: PhaseSymbol) -> SpectralField:
    u, _ = duhamel_modes(forcing, sym)
    return from_dual_x(SpectralField(forcing.grid, u, "dual_x"))


def trace_series(u: SpectralField, order: int, band: int | None = None) -> np.ndarray:
    """d^j u / dx^j at x = 0 for every time node (spectral evaluation)."""
    if order not in range(6):
        raise ValueError("trace orders are 0..5")
    grid = u.grid
    v = to_dual_x(u).values
    xi = grid.xi.copy()
    if order % 2:
        xi[grid.nx // 2] = 0.0  # drop the unpaired Nyquist mode for odd derivatives
    mult = (1j * xi) ** order
    dv = mult[:, None] * v
    band = band or max(1, grid.nx // 64)
    top = np.argsort(np.abs(grid.xi))[-2 * band:]
    energy = np.sum(np.abs(dv) ** 2)
    if energy > 0 and np.sum(np.abs(dv[top]) ** 2) > 0.01 * energy:
        warnings.warn(f"trace of order {order}: top modes carry more than 1% of the energy", AliasingWarning)
    return (grid.dxi / np.sqrt(2 * np.pi)) * np.sum(dv, axis=0)


def traces_at_zero(u: SpectralField, orders=TRACE_ORDERS):
    """TraceTriple for orders (0, 2, 4); a dict {order: series} for any other selection."""
    orders = tuple(orders)
    series = {j: trace_series(u, j) for j in orders}
    if orders == TRACE_ORDERS:
        return TraceTriple(u.grid.t, series[0], series[2], series[4])
    return series
