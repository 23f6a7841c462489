import numpy as np
import pytest
from scipy.integrate import quad

from sobe.errors import InvalidExponent
from sobe.estimates import (
    BilinearLattice,
    RatioReport,
    SweepConfig,
    bilinear_constant,
    check_lemma_int_tau,
    check_lemma_poly,
    duhamel_ratio,
    int_tau_integral,
    kato_ratio,
    poly_integral,
    random_forcing,
)
from sobe.grids import SpaceTimeGrid, SpectralField


def test_ratio_report_verdicts():
    flat = RatioReport.from_series("x", {}, [1, 2, 4], [1.0, 1.05, 1.1])
    assert flat.verdict == "stable" and flat.trend_slope <= 0.1
    up = RatioReport.from_series("x", {}, [1, 2, 4], [1.0, 2.0, 4.0])
    assert up.verdict == "growing" and up.trend_slope == pytest.approx(1.0)
    assert up.growth_factors() == [2.0, 2.0]
    short = RatioReport.from_series("x", {}, [1, 2], [1.0, 2.0])
    assert short.verdict is None and short.trend_slope is None
    empty = RatioReport.from_series("x", {}, [1, 2, 4], [float("nan")] * 3)
    assert empty.skipped and empty.verdict is None
    rows = up.rows()
    assert len(rows) == 3 and rows[1]["level"] == 2.0 and rows[1]["verdict"] == "growing"


def test_int_tau_arctan_value():
    assert int_tau_integral(2.0, 0.0, 0.0, 0.0) == pytest.approx(np.pi, rel=1e-10)


def test_int_tau_matches_direct_quadrature():
    val = int_tau_integral(2.0, 1.0, 3.0, -4.0)
    ref = quad(lambda x: 1 / ((1 + (x - 3) ** 2) * np.sqrt(1 + (x + 4) ** 2)), -np.inf, np.inf,
               epsabs=0, epsrel=1e-12, limit=500)[0]
    assert val == pytest.approx(ref, rel=1e-9)


def test_int_tau_bound_and_weightless_case():
    rep = check_lemma_int_tau(2.0, 1.0, 0.0, 5.0)
    # C is a sampled maximum, so other points may exceed it slightly
    assert all(0.05 < r <= 1.5 for r in rep.ratios)
    assert 0 < rep.params["ratio"] <= 1.5
    flat = check_lemma_int_tau(2.0, 0.0, 0.0, 30.0)
    assert np.ptp(flat.ratios) < 1e-9
    with pytest.raises(InvalidExponent):
        check_lemma_int_tau(1.0, 0.5, 0, 0)
    with pytest.raises(InvalidExponent):
        check_lemma_int_tau(2.0, 3.0, 0, 0)


def test_poly_integral_reference_value():
    ref = quad(lambda x: 1 / np.sqrt(1 + x**4), -np.inf, np.inf, epsabs=0, epsrel=1e-12)[0]
    assert poly_integral([1.0, 0.0, 0.0], 1.0) == pytest.approx(ref, rel=1e-9)


def test_quad_half_scaling_law():
    a = poly_integral([1.0, 0.0, 0.0], 1.0)
    b = poly_integral([4.0, 0.0, 0.0], 1.0)
    assert b / a == pytest.approx(0.5, rel=0.02)


def test_cubic_leading_coefficient():
    r1 = poly_integral([1.0, 0, 0, 0], 0.6)
    r8 = poly_integral([8.0, 0, 0, 0], 0.6) / 8 ** (-1 / 3)
    assert r8 == pytest.approx(r1, rel=0.05)


@pytest.mark.parametrize("kind,coef,rho", [
    ("quad_half", [1.0, 0.3, -2.0], 0.75),
    ("cubic_third", [1.0, -0.5, 0.2, 1.0], 0.6),
    ("quad_product", [2.0, 1.0, 0.5], 1.5),
])
def test_lemma_ratio_invariance(kind, coef, rho):
    rep = check_lemma_poly(kind, coef, rho)
    assert max(rep.ratios) / min(rep.ratios) - 1 <= 0.02
    assert rep.verdict == "stable"


def test_poly_preconditions():
    with pytest.raises(InvalidExponent):
        check_lemma_poly("quad_half", [0.0, 1.0, 1.0], 1.0)
    with pytest.raises(InvalidExponent):
        check_lemma_poly("quad_product", [1.0, 0.0, 0.0], 0.9)
    with pytest.raises(ValueError):
        check_lemma_poly("quartic", [1.0, 0.0, 0.0], 1.0)


def test_random_forcing_same_function_on_refinement():
    g1 = SpaceTimeGrid(x_extent=20.0, nx=64, t_extent=4.0, nt=32)
    g2 = SpaceTimeGrid(x_extent=20.0, nx=128, t_extent=4.0, nt=64)
    f1 = random_forcing(g1, 3).values.real
    f2 = random_forcing(g2, 3, lattice=g1).values.real
    assert np.allclose(f2[::2, ::2], f1, atol=1e-12)


SMALL = [SpaceTimeGrid(x_extent=20.0, nx=n, t_extent=4.0, nt=m) for n, m in ((64, 32), (128, 64))]


def test_kato_ratio_small():
    rep = kato_ratio(2, -0.7, 0.55, SMALL, n_samples=3)
    assert all(np.isfinite(rep.ratios)) and min(rep.ratios) > 0
    assert abs(rep.ratios[1] / rep.ratios[0] - 1) <= 0.15
    with pytest.raises(InvalidExponent):
        kato_ratio(6, -0.7, 0.55, SMALL)
    with pytest.raises(InvalidExponent):
        kato_ratio(0, -1.5, 0.55, SMALL)


def test_duhamel_ratio_small():
    rep = duhamel_ratio(-0.7, 0.5, -0.45, SMALL[0], n_samples=2)
    assert rep.levels == (1.0, 2.0, 4.0)
    assert all(np.isfinite(rep.ratios))
    end = duhamel_ratio(-0.7, 0.55, -0.45, SMALL[0], times=(1.0,), n_samples=2)
    assert np.isfinite(end.ratios[0]) and end.ratios[0] > 0
    with pytest.raises(InvalidExponent):
        duhamel_ratio(-0.7, 0.5, 0.1, SMALL[0])
    with pytest.raises(InvalidExponent):
        duhamel_ratio(-0.7, 0.5, -0.45, SMALL[0], times=(2.0,))


def test_bilinear_zero_and_conv():
    lat = BilinearLattice(2.0, 0.25, 0.5, 0.7, 0.505)
    z = np.zeros(lat.shape)
    assert lat.value(z, z) == 0.0
    # lattice convolution against a brute-force sum
    rng = np.random.default_rng(1)
    small = BilinearLattice(0.5, 0.25, 0.5, 0.7, 0.505)
    g1, g2 = rng.random(small.shape), rng.random(small.shape)
    n, m = small.shape
    cn, cm = n // 2, m // 2
    ref = np.zeros(small.shape)
    for i in range(n):
        for j in range(m):
            for p in range(n):
                for q in range(m):
                    a, b = i - p + cn, j - q + cm
                    if 0 <= a < n and 0 <= b < m:
                        ref[i, j] += g1[p, q] * g2[a, b]
    assert np.allclose(small.conv(g1, g2), ref * small.cell)


def test_bilinear_monotone_on_nested_lattices():
    cfg = SweepConfig(levels=(16, 24, 32), samples=1, iters=10)
    prev = None
    for radius in (1.0, 1.5, 2.0):
        lat = BilinearLattice(radius, cfg.dxi, 0.25, 0.7, 0.505)
        res = bilinear_constant(-0.7, 0.505, 0, cfg, warm=prev, lattice=lat)
        if prev is not None:
            assert res.constant >= prev.constant
        prev = res


def test_sweep_config_validation():
    with pytest.raises(InvalidExponent):
        SweepConfig(sigma_list=(0.5,))
    with pytest.raises(ValueError):
        SweepConfig(levels=(64, 128))
    with pytest.raises(InvalidExponent):
        bilinear_constant(-0.7, 1.0, 16)
