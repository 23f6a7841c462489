"""Space-time grids, Fourier transforms, the time cutoff and discrete norms.

Convention: a field is synthesised as

    f(x, t) = (1 / 2pi) int int fhat(xi, tau) exp(i (x xi + t tau)) dxi dtau

and the analysis transform carries the same 1/(2pi), so Parseval holds with
unit constant.  One-dimensional slices use 1/sqrt(2pi).  Arrays are stored in
FFT order; ``grid.xi`` and ``grid.tau`` list the matching frequencies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import RepresentationMismatch
from .symbols import PhaseSymbol, phase

CONVENTION = "e^{i(x xi + t tau)}"
REPRESENTATIONS = ("physical", "dual", "dual_x")


def japanese(x):
    """<x> = sqrt(1 + x^2)."""
    return np.sqrt(1.0 + np.square(x))


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Box [-L, L) x [-T, T) with nx x nt nodes; x = 0 and t = 0 are nodes."""

    x_extent: float = 40.0
    nx: int = 1024
    t_extent: float = 4.0
    nt: int = 512

    def __post_init__(self):
        if self.x_extent <= 0 or self.t_extent <= 0:
            raise ValueError("grid extents must be positive")
        if self.nx % 2 or self.nt % 2 or self.nx < 4 or self.nt < 4:
            raise ValueError("nx and nt must be even and at least 4")

    @property
    def dx(self) -> float:
        return 2 * self.x_extent / self.nx

    @property
    def dt(self) -> float:
        return 2 * self.t_extent / self.nt

    @property
    def x(self) -> np.ndarray:
        return -self.x_extent + self.dx * np.arange(self.nx)

    @property
    def t(self) -> np.ndarray:
        return -self.t_extent + self.dt * np.arange(self.nt)

    @property
    def xi(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)

    @property
    def tau(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.nt, d=self.dt)

    @property
    def dxi(self) -> float:
        return np.pi / self.x_extent

    @property
    def dtau(self) -> float:
        return np.pi / self.t_extent

    @property
    def i_x0(self) -> int:
        return self.nx // 2

    @property
    def i_t0(self) -> int:
        return self.nt // 2

    def as_dict(self) -> dict:
        return {"x_extent": self.x_extent, "nx": self.nx, "t_extent": self.t_extent, "nt": self.nt}


@dataclass(frozen=True)
class SpectralField:
    """Values on a grid, tagged with their representation.

    ``physical``: (x, t); ``dual``: (xi, tau); ``dual_x``: (xi, t).
    """

    grid: SpaceTimeGrid
    values: np.ndarray = field(repr=False)
    representation: str = "physical"

    def __post_init__(self):
        if self.representation not in REPRESENTATIONS:
            raise RepresentationMismatch(f"unknown representation {self.representation!r}")
        if self.values.shape != (self.grid.nx, self.grid.nt):
            raise RepresentationMismatch(
                f"values have shape {self.values.shape}, grid expects {(self.grid.nx, self.grid.nt)}"
            )

    @classmethod
    def zeros(cls, grid: SpaceTimeGrid, representation: str = "physical") -> "SpectralField":
        return cls(grid, np.zeros((grid.nx, grid.nt), dtype=complex), representation)

    @classmethod
    def from_function(cls, grid: SpaceTimeGrid, fn) -> "SpectralField":
        X, T = np.meshgrid(grid.x, grid.t, indexing="ij")
        return cls(grid, np.asarray(fn(X, T), dtype=complex) * np.ones_like(X), "physical")

    def _check(self, other: "SpectralField"):
        if other.grid != self.grid or other.representation != self.representation:
            raise RepresentationMismatch("fields live on different grids or representations")

    def __add__(self, other):
        self._check(other)
        return replace(self, values=self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return replace(self, values=self.values - other.values)

    def __mul__(self, c):
        return replace(self, values=self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return replace(self, values=-self.values)

    @property
    def real(self) -> np.ndarray:
        return self.values.real


def _phase_x(grid: SpaceTimeGrid) -> np.ndarray:
    return np.exp(1j * grid.x_extent * grid.xi)


def _phase_t(grid: SpaceTimeGrid) -> np.ndarray:
    return np.exp(1j * grid.t_extent * grid.tau)


def _x_forward(v, grid):
    return np.fft.fft(v, axis=0) * (grid.dx / np.sqrt(2 * np.pi)) * _phase_x(grid)[:, None]


def _x_inverse(v, grid):
    return np.fft.ifft(v / _phase_x(grid)[:, None], axis=0) * (np.sqrt(2 * np.pi) / grid.dx)


def _t_forward(v, grid):
    return np.fft.fft(v, axis=1) * (grid.dt / np.sqrt(2 * np.pi)) * _phase_t(grid)[None, :]


def _t_inverse(v, grid):
    return np.fft.ifft(v / _phase_t(grid)[None, :], axis=1) * (np.sqrt(2 * np.pi) / grid.dt)


def to_dual(f: SpectralField) -> SpectralField:
    g = f.grid
    if f.representation == "dual":
        return f
    v = f.values
    if f.representation == "physical":
        v = _x_forward(v, g)
    return SpectralField(g, _t_forward(v, g), "dual")


def to_physical(f: SpectralField) -> SpectralField:
    g = f.grid
    if f.representation == "physical":
        return f
    v = f.values
    if f.representation == "dual":
        v = _t_inverse(v, g)
    return SpectralField(g, _x_inverse(v, g), "physical")


def to_dual_x(f: SpectralField) -> SpectralField:
    g = f.grid
    if f.representation == "dual_x":
        return f
    if f.representation == "physical":
        return SpectralField(g, _x_forward(f.values, g), "dual_x")
    return SpectralField(g, _t_inverse(f.values, g), "dual_x")


def from_dual_x(f: SpectralField) -> SpectralField:
    if f.representation != "dual_x":
        raise RepresentationMismatch("expected a dual_x field")
    return SpectralField(f.grid, _x_inverse(f.values, f.grid), "physical")


def line_transform(values: np.ndarray, spacing: float, start: float) -> tuple[np.ndarray, np.ndarray]:
    """Unitary 1D transform of samples at start + k*spacing. Returns (freq, fhat)."""
    n = values.shape[-1]
    freq = 2 * np.pi * np.fft.fftfreq(n, d=spacing)
    fh = np.fft.fft(values, axis=-1) * (spacing / np.sqrt(2 * np.pi)) * np.exp(-1j * start * freq)
    return freq, fh


# ----------------------------------------------------------------------------
# cutoff


@dataclass(frozen=True)
class CutoffSpec:
    inner: float = 1.0
    outer: float = 2.0

    def __post_init__(self):
        if not (0 < self.inner < self.outer):
            raise ValueError("cutoff needs 0 < inner < outer")


def _psi(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = np.exp(-1.0 / r[pos])
    return out


def eta(c: CutoffSpec, t):
    """Smooth even cutoff: 1 on |t| <= inner, 0 on |t| >= outer."""
    t = np.abs(np.asarray(t, dtype=float))
    r = (t - c.inner) / (c.outer - c.inner)
    a, b = _psi(1.0 - r), _psi(r)
    out = np.where(t <= c.inner, 1.0, np.where(t >= c.outer, 0.0, a / np.where(a + b > 0, a + b, 1.0)))
    return out if out.ndim else float(out)


# ----------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class NormSpec:
    s: float = 0.0
    b: float = 0.5
    sigma: float = 0.55
    variant: str = "composite"

    def __post_init__(self):
        if self.variant not in ("sobolev_line", "sobolev_halfline_extension", "bourgain", "lambda_sigma", "composite"):
            raise ValueError(f"unknown norm variant {self.variant!r}")
        if self.variant in ("lambda_sigma", "composite") and not (0.5 < self.sigma < 1.0):
            raise ValueError("sigma must lie in (1/2, 1)")


def sobolev_norm_line(values, spacing: float, s: float) -> float:
    """Discrete H^s norm of a uniformly sampled line slice (periodic box)."""
    values = np.asarray(values)
    n = values.shape[-1]
    freq, fh = line_transform(values, spacing, 0.0)
    dfreq = 2 * np.pi / (n * spacing)
    return float(np.sqrt(np.sum(japanese(freq) ** (2 * s) * np.abs(fh) ** 2) * dfreq))


def sobolev_norm_halfline(values, spacing: float, s: float, pad_factor: int = 2) -> float:
    """H^s norm of the zero extension of samples on [0, X); an upper proxy for the quotient norm."""
    values = np.asarray(values)
    n = values.shape[-1]
    ext = np.zeros(values.shape[:-1] + (pad_factor * n,), dtype=values.dtype)
    ext[..., (pad_factor - 1) * n:] = values
    return sobolev_norm_line(ext, spacing, s)


def _dual_values(f: SpectralField) -> np.ndarray:
    if f.representation != "dual":
        f = to_dual(f)
    return f.values


def modulation(sym: PhaseSymbol, grid: SpaceTimeGrid, kind: str = "exact") -> np.ndarray:
    """|tau| - phase(xi) ('exact') or |tau| - |xi|^3 - (ab/2)|xi| ('kdv'), shape (nx, nt)."""
    xi = np.abs(grid.xi)[:, None]
    tau = np.abs(grid.tau)[None, :]
    if kind == "exact":
        return tau - phase(sym, xi)
    if kind == "kdv":
        return tau - xi**3 - 0.5 * sym.ab * xi
    raise ValueError(f"unknown modulation kind {kind!r}")


def bourgain_norm(f: SpectralField, sym: PhaseSymbol, spec: NormSpec, modulation_kind: str = "exact") -> float:
    g = f.grid
    v = _dual_values(f)
    w = japanese(g.xi)[:, None] ** (2 * spec.s) * japanese(modulation(sym, g, modulation_kind)) ** (2 * spec.b)
    return float(np.sqrt(np.sum(w * np.abs(v) ** 2) * g.dxi * g.dtau))


def lambda_sigma_norm(f: SpectralField, spec: NormSpec) -> float:
    g = f.grid
    v = _dual_values(f)
    low = np.abs(g.xi) <= 1.0
    w = japanese(g.tau)[None, :] ** (2 * spec.sigma)
    return float(np.sqrt(np.sum(w * np.abs(v[low]) ** 2) * g.dxi * g.dtau))


def composite_norm(f: SpectralField, sym: PhaseSymbol, spec: NormSpec) -> float:
    if f.representation != "dual":
        f = to_dual(f)
    return bourgain_norm(f, sym, spec) + lambda_sigma_norm(f, spec)


def l2_norm(f: SpectralField) -> float:
    """Discrete space-time L^2 norm of the physical values."""
    v = to_physical(f).values
    return float(np.sqrt(np.sum(np.abs(v) ** 2) * f.grid.dx * f.grid.dt))


# ----------------------------------------------------------------------------
# serialization


def write_field_csv(f: SpectralField, path) -> None:
    g = f.grid
    if f.representation == "physical":
        a, b, names = g.x, g.t, ("x", "t")
    elif f.representation == "dual":
        a, b, names = g.xi, g.tau, ("xi", "tau")
    else:
        a, b, names = g.xi, g.t, ("xi", "t")
    A, B = np.meshgrid(a, b, indexing="ij")
    data = np.column_stack([A.ravel(), B.ravel(), f.values.real.ravel(), f.values.imag.ravel()])
    np.savetxt(path, data, delimiter=",", header=f"{names[0]},{names[1]},re,im", comments="", fmt="%.17g")


def write_field_binary(f: SpectralField, path) -> None:
    header = {
        "grid": f.grid.as_dict(),
        "representation": f.representation,
        "convention": CONVENTION,
        "dtype": "complex128",
        "order": "C",
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(f.values, dtype=np.complex128).tobytes())


def read_field_binary(path) -> SpectralField:
    raw = Path(path).read_bytes()
    cut = raw.index(b"\n")
    header = json.loads(raw[:cut])
    grid = SpaceTimeGrid(**header["grid"])
    vals = np.frombuffer(raw[cut + 1:], dtype=np.complex128).reshape(grid.nx, grid.nt).copy()
    return SpectralField(grid, vals, header["representation"])
