import math

import numpy as np
import pytest
from scipy.special import gamma

from extension import ConeDensity
from measure import (MeasureError, SampledFunction, WeightedConeMeasure, coarea_integral, cone_norm,
                     integrand_suite, log_grid_samples, lorentz_norm, plane_integral,
                     sublevel_histogram, sublevel_measure)
from utils.gauge import GaugeError, make_gauge, superellipse_spec


def _one(xi, t):
    return np.ones(np.shape(t))


# ---------- plane / co-area ----------

def test_annulus_area_on_circle(circle):
    res = plane_integral(integrand_suite()["one"], circle, (1.0, 2.0))
    assert res.converged
    assert float(res) == pytest.approx(3 * np.pi, rel=1e-10)


def test_gaussian_mass_on_circle(circle):
    res = plane_integral(integrand_suite()["gaussian"], circle, (0.0, 6.0))
    assert float(res) == pytest.approx(1.0, rel=1e-10)


def test_superellipse_annulus_area(quartic):
    # |{|x|^4 + |y|^4 <= 1}| = 4 Γ(5/4)^2 / Γ(3/2)
    unit = 4.0 * gamma(1.25) ** 2 / gamma(1.5)
    assert float(plane_integral(integrand_suite()["one"], quartic, (1.0, 2.0))) == pytest.approx(3 * unit, rel=1e-10)


@pytest.mark.parametrize("name", sorted(integrand_suite()))
def test_coarea_matches_plane(name, circle, ellipse, quartic):
    f = integrand_suite()[name]
    for g in (circle, ellipse, quartic):
        plane = plane_integral(f, g, (0.5, 2.0))
        sliced = coarea_integral(f, g, (0.5, 2.0))
        assert abs(float(plane) - float(sliced)) <= 1e-5 * max(abs(float(plane)), 1.0)


def test_scheme_below_minimum_rejected(circle):
    with pytest.raises(MeasureError):
        plane_integral(integrand_suite()["one"], circle, (1.0, 2.0), scheme=(8, 128))


def test_invalid_t_range_rejected(circle):
    with pytest.raises(MeasureError):
        coarea_integral(integrand_suite()["one"], circle, (2.0, 1.0))


# ---------- cone measures and norms ----------

def test_measure_validation(circle):
    with pytest.raises(MeasureError):
        WeightedConeMeasure(circle, support="half")
    with pytest.raises(MeasureError):
        WeightedConeMeasure(circle, exponent=-0.5)


def test_corollary_measure_of_constant(circle):
    mu = WeightedConeMeasure.corollary(circle)
    assert mu.exponent == pytest.approx(1.0 / 3.0) and mu.support == "compact"
    assert float(cone_norm(_one, mu, 1.0).value) == pytest.approx(3 * np.pi, rel=1e-10)


def test_corollary_weight_scales_with_det(ellipse):
    # w ≡ 1/4 on the ellipse, area of Δ is 3π · 2
    mu = WeightedConeMeasure.corollary(ellipse)
    expected = 0.25 ** (1.0 / 3.0) * 6 * np.pi
    assert float(cone_norm(_one, mu, 1.0).value) == pytest.approx(expected, rel=1e-10)


def test_cone_norm_of_zero_density(circle):
    res = cone_norm(ConeDensity("zero"), WeightedConeMeasure(circle), 2.0)
    assert float(res.value) == 0.0


def test_exponential_density_on_full_cone(circle):
    # ∫_0^∞ e^{-t} dt ∫ dθ with dξ/φ = dt dθ on the round cone
    res = cone_norm(ConeDensity("exponential", scale=1.0), WeightedConeMeasure(circle), 1.0)
    assert res.converged
    assert float(res.value) == pytest.approx(2 * np.pi, rel=1e-8)


def test_cone_norm_needs_decay_on_full_cone(circle):
    with pytest.raises(MeasureError):
        cone_norm(_one, WeightedConeMeasure(circle), 1.0)


def test_cone_norm_rejects_small_q(circle):
    with pytest.raises(MeasureError):
        cone_norm(_one, WeightedConeMeasure.corollary(circle), 0.5)


def test_sup_norm(circle):
    u = ConeDensity("exponential", scale=1.0)
    mu = WeightedConeMeasure.corollary(circle)
    # on 1 <= t <= 2 the largest value is e^{-1}, reached at a Gauss node only approximately
    value = float(cone_norm(u, mu, math.inf).value)
    assert math.exp(-2.0) < value <= math.exp(-1.0)
    assert value == pytest.approx(math.exp(-1.0), rel=1e-2)


# ---------- Lorentz norms ----------

def test_weak_norm_of_critical_power():
    q = 2.0
    f = log_grid_samples(lambda s: s ** (-1.0 / q), 1e-6, 1e6, 20001)
    assert lorentz_norm(f, q, math.inf) == pytest.approx(1.0, abs=1e-3)


def test_diagonal_lorentz_norm_is_lebesgue():
    rng = np.random.default_rng(2)
    f = SampledFunction(rng.normal(size=500), rng.uniform(0.1, 2.0, 500))
    for q in (1.0, 2.0, 3.5):
        plain = np.sum(f.values ** q * f.weights) ** (1.0 / q)
        assert lorentz_norm(f, q, q) == pytest.approx(plain, rel=1e-12)


@pytest.mark.parametrize("q, r", [(2.0, 1.0), (2.0, 4.0), (3.0, 1.5)])
def test_indicator_lorentz_norm(q, r):
    m = 2.5
    f = SampledFunction(np.ones(10), np.full(10, m / 10))
    assert lorentz_norm(f, q, r) == pytest.approx((q / r) ** (1.0 / r) * m ** (1.0 / q), rel=1e-12)


def test_lorentz_norm_ignores_sample_order():
    rng = np.random.default_rng(4)
    values, weights = rng.exponential(size=300), rng.uniform(0.5, 1.5, 300)
    perm = rng.permutation(300)
    a = lorentz_norm(SampledFunction(values, weights), 2.0, 3.0)
    b = lorentz_norm(SampledFunction(values[perm], weights[perm]), 2.0, 3.0)
    assert a == b


@pytest.mark.parametrize("r", [1.0, 2.0, 4.0, 8.0])
def test_weak_norm_is_dominated(r):
    q = 2.0
    rng = np.random.default_rng(int(r))
    f = SampledFunction(rng.lognormal(size=400), rng.uniform(0.01, 1.0, 400))
    assert lorentz_norm(f, q, math.inf) <= (r / q) ** (1.0 / r) * lorentz_norm(f, q, r) * (1 + 1e-12)


def test_lorentz_rejects_bad_input():
    with pytest.raises(MeasureError):
        SampledFunction(np.ones(3), np.ones(4))
    with pytest.raises(MeasureError):
        SampledFunction(np.ones(2), np.array([1.0, -1.0]))
    with pytest.raises(MeasureError):
        lorentz_norm(SampledFunction(np.ones(2), np.ones(2)), 0.5, 1.0)


# ---------- dyadic sublevel sets ----------

def test_circle_lives_in_one_bin(circle):
    hist = sublevel_histogram(circle, nodes=2 ** 16)
    assert hist.bins.tolist() == [0]
    assert hist.arclength_of(0) == pytest.approx(2 * np.pi, rel=1e-10)
    assert hist.zero_arclength == 0.0


def test_sublevel_measure_picks_one_bin(circle, quartic):
    assert sublevel_measure(circle, 0, nodes=2 ** 16) == pytest.approx(2 * np.pi, rel=1e-10)
    assert sublevel_measure(circle, -1, nodes=2 ** 16) == 0.0
    hist = sublevel_histogram(quartic, nodes=2 ** 16)
    j = int(hist.bins[np.argmax(hist.counts)])
    assert sublevel_measure(quartic, j, nodes=2 ** 16) == hist.arclength_of(j) > 0


@pytest.mark.parametrize("k", [4, 6])
def test_superellipse_sublevel_slope(k):
    hist = sublevel_histogram(make_gauge(superellipse_spec(k)), nodes=2 ** 20)
    assert hist.completeness_residual() <= 1e-6
    assert hist.fit_slope() == pytest.approx(1.0 / (k - 2), rel=0.1)


def test_sublevel_rejects_coarse_grids_and_space_curves(quartic, sphere):
    with pytest.raises(MeasureError):
        sublevel_histogram(quartic, nodes=1024)
    with pytest.raises(GaugeError):
        sublevel_histogram(sphere)
