"""Dispersion symbol, characteristic roots and Cramer kernels.

The linear operator is ``u_tt - a^2 u_xx + a b u_xxxx - u_xxxxxx`` with
``a = alpha`` in (0, 1] and ``b = beta`` in {+1, -1}.  A Fourier mode
``exp(i x xi)`` oscillates in time with frequency ``phase(xi)``; a Laplace
mode ``exp(rho t + gamma x)`` solves the equation when

    gamma^6 - a b gamma^4 + a^2 gamma^2 - rho^2 = 0,

which is a cubic in ``z = gamma^2``.  The boundary operator keeps the three
roots with negative real part.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    AmbiguousSignError,
    DegenerateRootsError,
    InvalidSymbolError,
    TrackingFailure,
)

RESIDUAL_TOL = 1e-10
AXIS_TOL = 1e-12


@dataclass(frozen=True)
class PhaseSymbol:
    alpha: float = 1.0
    beta: int = 1

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise InvalidSymbolError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.beta not in (1, -1):
            raise InvalidSymbolError(f"beta must be +1 or -1, got {self.beta}")

    @property
    def ab(self) -> float:
        return self.alpha * self.beta

    def __call__(self, xi):
        return phase(self, xi)

    def derivative(self, mu):
        """d(phase)/d(mu) = (3 mu^4 + 2 a b mu^2 + a^2) / sqrt(mu^4 + a b mu^2 + a^2)."""
        mu = np.asarray(mu, dtype=float)
        a, ab = self.alpha, self.ab
        return (3 * mu**4 + 2 * ab * mu**2 + a * a) / np.sqrt(mu**4 + ab * mu**2 + a * a)


def phase(sym: PhaseSymbol, xi):
    """Return sqrt(xi^6 + a b xi^4 + a^2 xi^2), evaluated as |xi| sqrt(...)."""
    xi = np.asarray(xi, dtype=float)
    a, ab = sym.alpha, sym.ab
    rad = xi**4 + ab * xi**2 + a * a
    if np.any(rad < 0):
        raise InvalidSymbolError("negative radicand in the phase symbol")
    out = np.abs(xi) * np.sqrt(rad)
    return out if out.ndim else float(out)


def equivalence_ratio(sym: PhaseSymbol, x, y):
    """Ratio comparing the exact modulation with its KdV-type surrogate.

    (1 + |x - y^{3/2} - (a b / 2) y^{1/2}|) / (1 + |x - sqrt(y^3 + a b y^2 + a^2 y)|)
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("equivalence_ratio needs x, y >= 0")
    a, ab = sym.alpha, sym.ab
    num = 1.0 + np.abs(x - y**1.5 - 0.5 * ab * np.sqrt(y))
    den = 1.0 + np.abs(x - np.sqrt(y**3 + ab * y**2 + a * a * y))
    out = num / den
    return out if out.ndim else float(out)


def modulation_gap(sym: PhaseSymbol, y):
    """|sqrt(y^3 + a b y^2 + a^2 y) - y^{3/2} - (a b / 2) y^{1/2}|, bounded in y >= 0."""
    y = np.asarray(y, dtype=float)
    a, ab = sym.alpha, sym.ab
    return np.abs(np.sqrt(y**3 + ab * y**2 + a * a * y) - y**1.5 - 0.5 * ab * np.sqrt(y))


# ----------------------------------------------------------------------------
# cubic in z = gamma^2


def char_poly(sym: PhaseSymbol, z, rho):
    z = np.asarray(z, dtype=complex)
    return z**3 - sym.ab * z**2 + sym.alpha**2 * z - np.asarray(rho, dtype=complex) ** 2


def _char_dpoly(sym: PhaseSymbol, z):
    return 3 * z**2 - 2 * sym.ab * z + sym.alpha**2


def _cubic_roots(sym: PhaseSymbol, rho: np.ndarray) -> np.ndarray:
    """All three z-roots for every rho, shape (n, 3). Companion eigenvalues + Newton polish."""
    rho = np.atleast_1d(np.asarray(rho, dtype=complex))
    n = rho.size
    comp = np.zeros((n, 3, 3), dtype=complex)
    comp[:, 0, 0] = sym.ab
    comp[:, 0, 1] = -(sym.alpha**2)
    comp[:, 0, 2] = rho**2
    comp[:, 1, 0] = 1.0
    comp[:, 2, 1] = 1.0
    z = np.linalg.eigvals(comp)
    for _ in range(2):
        dp = _char_dpoly(sym, z)
        ok = np.abs(dp) > 1e-300
        step = np.where(ok, char_poly(sym, z, rho[:, None]) / np.where(ok, dp, 1.0), 0.0)
        z = z - step
    return z


def _select_decaying(sym: PhaseSymbol, rho: np.ndarray, z: np.ndarray, hint=None) -> np.ndarray:
    """gamma = -sqrt(z) with the sign fixed by the limit from Re(rho) > 0 on the axis."""
    gam = -np.sqrt(z)
    near_axis = np.abs(gam.real) <= AXIS_TOL * np.maximum(1.0, np.abs(gam))
    if not np.any(near_axis):
        return gam
    rr = np.broadcast_to(rho[:, None], z.shape)
    if hint is not None:
        hint = np.asarray(hint, dtype=complex).reshape(-1)
        keep = np.min(np.abs(gam[..., None] - hint), axis=-1)
        swap = np.min(np.abs(-gam[..., None] - hint), axis=-1)
        flip = near_axis & (swap < keep)
        return np.where(flip, -gam, gam)
    if np.any(near_axis & (rr.real < -AXIS_TOL)):
        raise AmbiguousSignError("root on the imaginary axis with Re(rho) < 0 and no hint")
    # perturb rho -> rho + eps: dz = 2 rho eps / P'(z); pick -sqrt of the shifted z
    dz = 2 * rr / _char_dpoly(sym, z)
    shifted = z + 1e-6 * np.maximum(1.0, np.abs(z)) * dz / np.maximum(np.abs(dz), 1e-300)
    gsh = -np.sqrt(shifted)
    sign = np.where(np.sign(gsh.imag) == np.sign(gam.imag), 1.0, -1.0)
    return np.where(near_axis, sign * gam, gam)


def _vandermonde(z: np.ndarray):
    """Delta and cofactors Delta_{j,m} for the system with rows (1), (z_j), (z_j^2)."""
    z1, z2, z3 = z[..., 0], z[..., 1], z[..., 2]
    delta = (z2 - z1) * (z3 - z1) * (z3 - z2)
    e = np.stack([z3 - z2, -(z3 - z1), z2 - z1], axis=-1)
    za = np.stack([z2, z1, z1], axis=-1)
    zb = np.stack([z3, z3, z2], axis=-1)
    ell = np.stack([za * zb, -(za + zb), np.ones_like(za)], axis=-1)
    return delta, e[..., None] * ell


def degeneracy_tol(rho) -> float:
    # Delta scales like |z|^3 ~ |rho|^2 for large |rho|
    return 1e-10 * max(1.0, abs(rho) ** 2)


@dataclass(frozen=True)
class RootSystem:
    """Decaying characteristic roots at one Laplace variable rho."""

    rho: complex
    roots: np.ndarray  # gamma_1..3, Re < 0
    delta: complex
    delta_jm: np.ndarray  # (3, 3): [j, m]
    z: np.ndarray = field(repr=False)

    def kernel(self) -> np.ndarray:
        """Delta_{j,m} / Delta, i.e. the inverse of the (transposed) Vandermonde matrix."""
        if abs(self.delta) <= degeneracy_tol(self.rho):
            raise DegenerateRootsError(f"|Delta| = {abs(self.delta):.3e} at rho = {self.rho}")
        return self.delta_jm / self.delta


def characteristic_roots(sym: PhaseSymbol, rho: complex, hint: Sequence[complex] | None = None) -> RootSystem:
    """Solve the sextic at ``rho`` and keep the three roots with Re(gamma) < 0.

    Roots on the imaginary axis (Re(rho) = 0) are assigned by the limit taken
    from Re(rho) > 0; a ``hint`` (previous roots along a path) overrides that.
    """
    rho = complex(rho)
    if rho == 0:
        raise DegenerateRootsError("rho = 0 is a branch point")
    z = _cubic_roots(sym, np.array([rho]))
    gam = _select_decaying(sym, np.array([rho]), z, hint=hint)[0]
    z = gam**2
    order = np.lexsort((gam.imag, gam.real))
    gam, z = gam[order], z[order]
    delta, djm = _vandermonde(z)
    rs = RootSystem(rho=rho, roots=gam, delta=complex(delta), delta_jm=djm, z=z)
    if abs(rs.delta) <= degeneracy_tol(rho):
        raise DegenerateRootsError(f"coinciding z-roots at rho = {rho}")
    return rs


def sextic_residual(sym: PhaseSymbol, gamma, rho):
    g2 = np.asarray(gamma, dtype=complex) ** 2
    return np.abs(g2**3 - sym.ab * g2**2 + sym.alpha**2 * g2 - complex(rho) ** 2) / max(1.0, abs(rho) ** 2)


def cramer_coefficients(rs: RootSystem, h_tilde) -> np.ndarray:
    """c_j = sum_m Delta_{j,m} h_m / Delta."""
    h = np.asarray(h_tilde, dtype=complex)
    return rs.kernel() @ h


# ----------------------------------------------------------------------------
# paths


@dataclass(frozen=True)
class ContourPath:
    """Piecewise-linear rho-path, traversed in order.

    The default path runs -iH -> 1-iH -> 1+iH -> iH where H = phase(1), so
    that it meets the oscillatory part (rho = i phase(mu), mu >= 1) exactly.
    """

    vertices: tuple
    orders: tuple = (48, 48, 48)

    @classmethod
    def standard(cls, sym: PhaseSymbol, width: float = 1.0, orders=(48, 48, 48)) -> "ContourPath":
        h = phase(sym, 1.0)
        return cls(vertices=(-1j * h, width - 1j * h, width + 1j * h, 1j * h), orders=tuple(orders))

    @property
    def segments(self):
        v = self.vertices
        return [(complex(v[k]), complex(v[k + 1])) for k in range(len(v) - 1)]

    def nodes(self, scale: int = 1):
        """Gauss-Legendre nodes and complex weights (d rho included) on every segment."""
        rhos, wts = [], []
        for (a, b), order in zip(self.segments, self.orders):
            x, w = np.polynomial.legendre.leggauss(int(order) * scale)
            rhos.append(0.5 * (a + b) + 0.5 * (b - a) * x)
            wts.append(0.5 * (b - a) * w)
        return np.concatenate(rhos), np.concatenate(wts)


def root_batch(sym: PhaseSymbol, rho) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised decaying roots for many rho (unordered labels). Returns (gamma, z)."""
    rho = np.atleast_1d(np.asarray(rho, dtype=complex))
    z = _cubic_roots(sym, rho)
    gam = _select_decaying(sym, rho, z)
    return gam, gam**2


def _match(prev: np.ndarray, cur: np.ndarray, guard: float) -> np.ndarray:
    d = np.abs(prev[:, None] - cur[None, :])
    perm = np.empty(3, dtype=int)
    for i in range(3):
        row = np.sort(d[i])
        if row[1] - row[0] <= guard * row[1]:
            raise TrackingFailure("ambiguous nearest-neighbour match; refine the path")
        perm[i] = int(np.argmin(d[i]))
    if len(set(perm.tolist())) != 3:
        raise TrackingFailure("two roots matched to the same neighbour; refine the path")
    return perm


def track_roots_along_contour(sym: PhaseSymbol, path: ContourPath | Sequence[complex], n_nodes: int | None = None,
                              guard: float = 0.10) -> list[RootSystem]:
    """Root systems along a path with continuous labels.

    ``path`` is either a ContourPath (its Gauss nodes are used, or ``n_nodes``
    equispaced points per segment) or an explicit sequence of rho values.
    """
    if isinstance(path, ContourPath):
        if n_nodes is None:
            rhos, _ = path.nodes()
        else:
            rhos = np.concatenate([a + (b - a) * np.linspace(0, 1, n_nodes) for a, b in path.segments])
    else:
        rhos = np.asarray(path, dtype=complex)
        if n_nodes is not None and rhos.size == 2:
            rhos = rhos[0] + (rhos[1] - rhos[0]) * np.linspace(0, 1, n_nodes)
    if np.any(rhos == 0):
        raise DegenerateRootsError("path passes through rho = 0")
    out = []
    prev = None
    for rho in rhos:
        rs = characteristic_roots(sym, rho, hint=prev)
        if prev is not None:
            perm = _match(prev, rs.roots, guard)
            gam = rs.roots[perm]
            delta, djm = _vandermonde(gam**2)
            rs = RootSystem(rho=rs.rho, roots=gam, delta=complex(delta), delta_jm=djm, z=gam**2)
        out.append(rs)
        prev = rs.roots
    return out


# ----------------------------------------------------------------------------
# oscillatory part: rho = i phase(mu), mu >= 1


@dataclass(frozen=True)
class OscillatoryRootData:
    mu: float
    gamma_plus: np.ndarray  # (-i mu, -p - i q, -p + i q)
    p: float
    q: float

    @property
    def z(self):
        return self.gamma_plus**2


def _quadratic_factor_root(sym: PhaseSymbol, mu):
    """Root with positive imaginary part of z^2 - (ab + mu^2) z + (mu^4 + ab mu^2 + a^2)."""
    a, ab = sym.alpha, sym.ab
    mu = np.asarray(mu, dtype=float)
    disc = 3 * mu**4 + 2 * ab * mu**2 + 3 * a * a
    return 0.5 * ((ab + mu**2) + 1j * np.sqrt(disc))


def oscillatory_roots_batch(sym: PhaseSymbol, mu) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised (gamma_plus (n, 3), p, q)."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    zq = _quadratic_factor_root(sym, mu)
    w = np.sqrt(zq)  # principal root: Re > 0, Im > 0
    p, q = w.real, w.imag
    gam = np.stack([-1j * mu, -p - 1j * q, -p + 1j * q], axis=-1)
    return gam, p, q


def oscillatory_roots(sym: PhaseSymbol, mu: float) -> OscillatoryRootData:
    if mu < 1:
        raise ValueError("oscillatory roots are defined for mu >= 1")
    gam, p, q = oscillatory_roots_batch(sym, mu)
    return OscillatoryRootData(mu=float(mu), gamma_plus=gam[0], p=float(p[0]), q=float(q[0]))


def oscillatory_kernel(sym: PhaseSymbol, mu) -> tuple[np.ndarray, np.ndarray]:
    """(gamma_plus, Delta+_{j,m} / Delta+) for an array of mu; shapes (n, 3) and (n, 3, 3)."""
    gam, _, _ = oscillatory_roots_batch(sym, mu)
    z = gam**2
    delta, djm = _vandermonde(z)
    scale = np.max(np.abs(z), axis=-1) ** 3
    if np.any(np.abs(delta) <= 1e-10 * np.maximum(1.0, scale)):
        raise DegenerateRootsError("degenerate oscillatory roots")
    return gam, djm / delta[:, None, None]


def contour_kernel(sym: PhaseSymbol, rho) -> tuple[np.ndarray, np.ndarray]:
    """(gamma, Delta_{j,m} / Delta) for an array of rho on the contour."""
    rho = np.atleast_1d(np.asarray(rho, dtype=complex))
    gam, z = root_batch(sym, rho)
    delta, djm = _vandermonde(z)
    tol = 1e-10 * np.maximum(1.0, np.abs(rho) ** 2)
    if np.any(np.abs(delta) <= tol):
        bad = rho[np.abs(delta) <= tol][0]
        raise DegenerateRootsError(f"coinciding z-roots near rho = {bad}")
    return gam, djm / delta[:, None, None]
