"""Run configuration: a YAML file mapped onto nested dataclasses with strict keys."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy.interpolate import CubicSpline

from .boundary import BoundaryConfig
from .errors import ConfigError
from .estimates import SweepConfig
from .grids import SpaceTimeGrid
from .solver import PicardConfig, ProblemData, SolverConfig

PROFILES = ("none", "bump", "gaussian-truncated")


@dataclass(frozen=True)
class ProfileSpec:
    """A named profile on x >= 0 (initial data) or t >= 0 (boundary data).

    bump: amplitude * exp(1 - 1 / (1 - r^2)) for r = (y - center) / width, |r| < 1.
    gaussian-truncated: amplitude * exp(-r^2), switched on smoothly over
    [onset, onset + ramp] and off beyond center +- cut * width.
    """

    profile: str = "none"
    amplitude: float = 0.0
    center: float = 0.0
    width: float = 1.0
    onset: float = 1.0
    ramp: float = 2.5
    cut: float = 6.0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}; expected one of {PROFILES}")
        if self.width <= 0 or self.ramp <= 0 or self.cut <= 0:
            raise ConfigError("profile width, ramp and cut must be positive")

    @property
    def active(self) -> bool:
        return self.profile != "none" and self.amplitude != 0

    @property
    def support(self) -> float:
        if not self.active:
            return 0.0
        if self.profile == "bump":
            return self.center + self.width
        return self.center + self.cut * self.width

    def function(self):
        if not self.active:
            return None
        amp, c, w = self.amplitude, self.center, self.width
        if self.profile == "bump":
            def fn(y):
                r = (np.asarray(y, dtype=float) - c) / w
                inside = np.abs(r) < 1
                safe = np.where(inside, 1 - r * r, 1.0)
                return np.where(inside, amp * np.exp(1 - 1 / safe), 0.0)
            return fn
        lo, hi = self.onset, self.onset + self.ramp
        top = c + self.cut * w

        def fn(y):
            y = np.asarray(y, dtype=float)
            return amp * np.exp(-(((y - c) / w) ** 2)) * smooth_step(y, lo, hi) * (1 - smooth_step(y, top - self.ramp, top))
        return fn


def smooth_step(y, a: float, b: float):
    """C-infinity transition from 0 (y <= a) to 1 (y >= b)."""
    s = np.clip((np.asarray(y, dtype=float) - a) / (b - a), 0.0, 1.0)
    inner = (s > 0) & (s < 1)
    e1 = np.exp(-1.0 / np.where(inner, s, 1.0))
    e2 = np.exp(-1.0 / np.where(inner, 1.0 - s, 1.0))
    return np.where(inner, e1 / (e1 + e2), (s >= 1).astype(float))


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary data: three named profiles, or a CSV file with columns t, h1, h2, h3."""

    h1: ProfileSpec = ProfileSpec()
    h2: ProfileSpec = ProfileSpec()
    h3: ProfileSpec = ProfileSpec()
    csv: typing.Optional[str] = None


@dataclass(frozen=True)
class ProblemSpec:
    beta: int = 1
    phi: ProfileSpec = ProfileSpec()
    psi: ProfileSpec = ProfileSpec()
    boundary: BoundarySpec = BoundarySpec()

    def __post_init__(self):
        if self.beta not in (1, -1):
            raise ConfigError("beta must be +1 or -1")


@dataclass(frozen=True)
class GridSpec:
    x_extent: float = 40.0
    nx: int = 1024
    t_extent: float = 4.0
    nt: int = 512


@dataclass(frozen=True)
class QuadratureSpec:
    contour_orders: tuple = (48, 48, 48)
    contour_width: float = 1.0
    mu_rel_tol: float = 1e-8
    mu_cap: float = 200.0
    tail_tol: float = 1e-6
    nodes_per_period: int = 8


@dataclass(frozen=True)
class SolverSpec:
    s: float = -0.7
    sigma: float = 0.505
    b: float = 0.5
    lam: typing.Optional[float] = None
    lambda_max: float = 64.0
    max_iter: int = 30
    rel_tol: float = 1e-10
    mollify_width: float = 0.0
    dealias: bool = True
    grid: GridSpec = GridSpec()
    quadrature: QuadratureSpec = QuadratureSpec()


@dataclass(frozen=True)
class LemmaSpec:
    int_tau: tuple = ((2.0, 1.0), (1.5, 0.5), (3.0, 3.0))
    separations: tuple = (0.0, 1.0, 10.0, 100.0)
    poly_rho: tuple = (0.75, 0.6, 1.5)
    samples: int = 24


@dataclass(frozen=True)
class RatioSpec:
    s: float = -0.7
    sigma: float = 0.55
    j: tuple = (0, 2, 3)
    samples: int = 8
    x_extent: float = 20.0
    nx: tuple = (128, 256, 512)
    t_extent: float = 4.0
    nt: tuple = (64, 128, 256)
    tolerance: float = 0.15


@dataclass(frozen=True)
class BilinearSpec:
    s_list: tuple = (-0.7, -0.9)
    sigma_list: tuple = (0.505,)
    levels: tuple = (64, 128, 256)
    dxi: float = 0.125
    tau_cells_per_radius: float = 8.0
    samples: int = 2
    iters: int = 30


@dataclass(frozen=True)
class VerifySpec:
    roots_samples: int = 1000
    lemmas: LemmaSpec = LemmaSpec()
    ratios: RatioSpec = RatioSpec()
    bilinear: BilinearSpec = BilinearSpec()


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    threads: int = 1
    out_dir: str = "out"
    problem: ProblemSpec = ProblemSpec()
    solver: SolverSpec = SolverSpec()
    verify: VerifySpec = VerifySpec()

    # -- derived objects ----------------------------------------------------

    def solver_config(self) -> SolverConfig:
        sv = self.solver
        q = sv.quadrature
        try:
            return SolverConfig(
                s=sv.s, sigma=sv.sigma, b=sv.b, beta=self.problem.beta,
                grid=SpaceTimeGrid(**dataclasses.asdict(sv.grid)),
                picard=PicardConfig(sv.max_iter, sv.rel_tol),
                boundary=BoundaryConfig(contour_orders=tuple(q.contour_orders), contour_width=q.contour_width,
                                        mu_rel_tol=q.mu_rel_tol, mu_cap=q.mu_cap, tail_tol=q.tail_tol,
                                        nodes_per_period=q.nodes_per_period),
                lambda_max=sv.lambda_max, mollify_width=sv.mollify_width, dealias=sv.dealias,
            )
        except ValueError as exc:
            raise ConfigError(f"solver: {exc}") from exc

    def problem_data(self, base_dir: Path | None = None) -> ProblemData:
        pr = self.problem
        bd = pr.boundary
        if bd.csv is not None:
            path = Path(bd.csv)
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            h, t_support = load_boundary_csv(path)
        else:
            h = tuple(p.function() for p in (bd.h1, bd.h2, bd.h3))
            t_support = max(p.support for p in (bd.h1, bd.h2, bd.h3))
        return ProblemData(phi=pr.phi.function(), psi=pr.psi.function(), h=h,
                           x_support=max(pr.phi.support, pr.psi.support), t_support=t_support)

    def sweep_config(self) -> SweepConfig:
        bl = self.verify.bilinear
        return SweepConfig(s_list=tuple(bl.s_list), sigma_list=tuple(bl.sigma_list), levels=tuple(bl.levels),
                           dxi=bl.dxi, tau_cells_per_radius=bl.tau_cells_per_radius, samples=bl.samples,
                           iters=bl.iters, seed=self.seed)

    def as_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form, ignoring settings that cannot change results."""
        body = {k: v for k, v in self.as_dict().items() if k not in ("out_dir", "threads")}
        text = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def load_boundary_csv(path: Path):
    """Cubic-spline callables from a CSV with header t,h1,h2,h3; zero outside the sampled range."""
    if not path.exists():
        raise ConfigError(f"boundary data file not found: {path}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"cannot parse boundary data {path}: {exc}") from exc
    if data.shape[1] != 4 or data.shape[0] < 4:
        raise ConfigError("boundary CSV needs columns t,h1,h2,h3 and at least 4 rows")
    t = data[:, 0]
    if np.any(np.diff(t) <= 0):
        raise ConfigError("boundary CSV times must increase")
    fns = []
    for m in range(3):
        spline = CubicSpline(t, data[:, m + 1])

        def fn(y, spline=spline):
            y = np.asarray(y, dtype=float)
            return np.where((y >= t[0]) & (y <= t[-1]), spline(np.clip(y, t[0], t[-1])), 0.0)
        fns.append(fn if np.any(data[:, m + 1]) else None)
    return tuple(fns), float(t[-1])


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, raw, where: str):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown keys {unknown}")
    kwargs = {}
    for name, value in raw.items():
        tp = hints[name]
        key = f"{where}.{name}" if where else name
        kwargs[name] = _coerce(tp, value, key)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def _coerce(tp, value, key: str):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, key)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        return None if value is None else _coerce(args[0], value, key)
    if tp is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list")
        return tuple(tuple(v) if isinstance(v, list) else v for v in value)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true or false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        return value
    return value


def parse_config(raw: dict | None) -> RunConfig:
    return _build(RunConfig, raw or {}, "")


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return parse_config(raw)
