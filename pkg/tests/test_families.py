import math
from fractions import Fraction

import numpy as np
import pytest

from extension import FamilyError, family_ratio
from families import (DEFAULT_DELTAS, ExponentError, ExponentPair, anisotropic_dilation,
                      contact_order_estimate, critical_q_scan, default_profiles,
                      dyadic_min_optimize, knapp_cap, knapp_params, knapp_scan,
                      subcritical_exponents)
from measure import WeightedConeMeasure
from utils.gauge import GaugeError, sigma_point


# ---------- exponent algebra ----------

def test_subcritical_exponents_exact_values():
    sub = subcritical_exponents(Fraction(6, 5), Fraction(3, 2), 3)
    assert sub.rho == Fraction(5, 4)
    assert sub.tau == Fraction(5, 3)
    assert sub.rho_conj == 5
    assert sub.holds


@pytest.mark.parametrize("k", range(3, 8))
def test_subcritical_identities_on_the_critical_line(k):
    for m in range(1, 11):
        p = 1 + Fraction(m, 11 * (k + 1))
        q = (p / (p - 1)) / (k + 1)
        sub = subcritical_exponents(p, q, k)
        assert sub.holds, (k, p, sub.residuals)
        assert 1 <= sub.rho < Fraction(4, 3)


def test_subcritical_float_inputs():
    p = 1.1
    q = (p / (p - 1)) / 4
    assert subcritical_exponents(p, q, 3).holds


def test_subcritical_rejects_bad_input():
    with pytest.raises(ExponentError):
        subcritical_exponents(Fraction(6, 5), Fraction(2), 3)      # off the critical line
    with pytest.raises(ExponentError):
        subcritical_exponents(Fraction(13, 10), Fraction(13, 12), 3)   # p beyond (k+2)/(k+1)
    with pytest.raises(ExponentError):
        subcritical_exponents(Fraction(6, 5), Fraction(3, 2), 2)


def test_exponent_pair_predicates():
    pair = ExponentPair(Fraction(6, 5), Fraction(2), 2)
    assert pair.p_conj == 6
    assert pair.is_cone_critical()
    assert pair.in_sharp_range() and not pair.in_barcelo_range(4)
    assert pair.knapp_slope() == pytest.approx(0.0, abs=1e-15)
    assert ExponentPair(Fraction(6, 5), Fraction(5, 2), 2).knapp_slope() == pytest.approx(-0.1)
    type4 = ExponentPair(Fraction(10, 9), Fraction(2), 4)
    assert type4.is_type_k_critical() and type4.in_sharp_range()
    assert ExponentPair(1, 2).p_conj == math.inf


def test_exponent_pair_validation():
    with pytest.raises(ExponentError):
        ExponentPair(0.5, 2)
    with pytest.raises(ExponentError):
        ExponentPair(1.2, 2).knapp_slope()


# ---------- dyadic optimisation ----------

def test_single_bin_is_exact():
    b = dyadic_min_optimize(0.7, 3.0, 3, Fraction(5, 3), Fraction(5, 4), occupied=[0])
    assert b.brute_ratio == pytest.approx(1.0, rel=1e-15)


def test_dyadic_contract():
    sub = subcritical_exponents(Fraction(6, 5), Fraction(3, 2), 3)
    envelopes = []
    for alpha in np.geomspace(1e-2, 1e2, 10):
        for E in np.geomspace(1e-2, 1e2, 10):
            b = dyadic_min_optimize(float(alpha), float(E), 3, sub.tau, sub.rho)
            assert max(b.brute_ratio, 1.0 / b.brute_ratio) <= 4.0
            envelopes.append(b.envelope_ratio)
    assert 1.0 / 8.0 <= min(envelopes) and max(envelopes) <= 8.0


def test_dyadic_rejects_nonpositive_inputs():
    with pytest.raises(ExponentError):
        dyadic_min_optimize(0.0, 1.0, 3, 1.5, 1.2)
    with pytest.raises(ExponentError):
        dyadic_min_optimize(1.0, 1.0, 3, 1.5, 1.2, occupied=[])


# ---------- Knapp geometry ----------

def test_anisotropic_dilation():
    np.testing.assert_allclose(anisotropic_dilation(0.25, 3), [0.125, 0.25])
    np.testing.assert_allclose(anisotropic_dilation(0.25, 2, sign=-1), [4.0])
    with pytest.raises(FamilyError):
        anisotropic_dilation(0.25, 1)


def test_circle_cap_height(circle):
    point = sigma_point(circle, np.array([0.0])).point[0]
    delta = 2.0 ** -9
    assert knapp_params(circle, point, delta).G() / delta ** 2 == pytest.approx(0.5, rel=1e-4)


def test_quartic_cap_height(quartic):
    # Σ near (1, 0) is x = (1 - y^4)^{1/4} = 1 - y^4/4 + ...
    point = sigma_point(quartic, np.array([0.0])).point[0]
    delta = 2.0 ** -3
    assert knapp_params(quartic, point, delta).G() / delta ** 4 == pytest.approx(0.25, rel=1e-3)


def test_sphere_cap_height_is_isotropic(sphere):
    kp = knapp_params(sphere, np.array([0.0, 0.0, 1.0]), 2.0 ** -5)
    # δ̲ = (δ^{3/2}, δ) and the sphere bends like |u|^2/2
    assert kp.G() == pytest.approx(0.5 * 2.0 ** -10, rel=1e-3)


def test_knapp_params_rejects_delta(circle):
    with pytest.raises(FamilyError):
        knapp_params(circle, np.array([1.0, 0.0]), 1.5)


def test_scaling_gap_stays_bounded_on_the_circle(circle):
    point = sigma_point(circle, np.array([0.0])).point[0]
    gaps = [knapp_params(circle, point, d).scaling_gap() for d in DEFAULT_DELTAS]
    # log δ - log(δ^2/2)/2 = log(2)/2 up to O(δ^2)
    np.testing.assert_allclose(gaps, 0.5 * math.log(2.0), atol=1e-2)


def test_scaling_gap_grows_on_a_flat_cap(quartic):
    point = sigma_point(quartic, np.array([0.0])).point[0]
    deltas = [2.0 ** -3, 2.0 ** -4, 2.0 ** -5]
    gaps = np.array([knapp_params(quartic, point, d).scaling_gap() for d in deltas])
    # G = δ^4/4 gives -log δ + log 2
    np.testing.assert_allclose(gaps, [-math.log(d) + math.log(2.0) for d in deltas], atol=1e-2)
    assert np.all(np.diff(gaps) > 0)


@pytest.mark.parametrize("fixture, k", [("circle", 2), ("quartic", 4), ("sextic", 6)])
def test_contact_order_estimate(fixture, k, request):
    g = request.getfixturevalue(fixture)
    assert contact_order_estimate(g, 0.0, DEFAULT_DELTAS) == pytest.approx(k, abs=0.05)


def test_cap_norm_matches_quadrature(circle):
    cap = knapp_cap(circle, 0.0, 1 / 8)
    p = 1.2
    point = sigma_point(circle, np.array([0.0])).point[0]
    predicted = knapp_params(circle, point, 1 / 8).norm_factor(p) * np.prod(
        [pr.dual_norm(p) for pr in default_profiles()])
    assert cap.lp_norm(p) == pytest.approx(predicted, rel=1e-12)
    assert float(cap.quadrature_lp_norm(p).value) == pytest.approx(predicted, rel=0.02)


def test_cap_is_concentrated_on_the_cone(circle):
    cap = knapp_cap(circle, 0.0, 1 / 16)
    lo, hi = cap.angular_window
    assert lo < 0.0 < hi and hi - lo <= np.pi + 1e-12
    # F̂ = g3(η) · g1(0) · g2(0) = e^{-π (η - 1.5)^2} at the cap point η = φ(ξ)
    xi = 1.5 * sigma_point(circle, np.array([0.0])).point
    assert float(cap.fhat(xi, np.array([1.5]))[0]) == pytest.approx(1.0, rel=1e-9)


def test_knapp_cap_rejects_bad_input(circle, sphere):
    with pytest.raises(FamilyError):
        knapp_cap(circle, 0.0, 0.3)
    with pytest.raises(FamilyError):
        knapp_cap(circle, 0.0, 0.0)
    with pytest.raises(GaugeError):
        knapp_cap(sphere, 0.0, 0.1)


# ---------- Knapp scans ----------

@pytest.mark.parametrize("q, expected", [(2.0, 0.0), (2.5, -0.1)])
def test_circle_knapp_slope(circle, q, expected):
    report = knapp_scan(circle, 1.2, q)
    assert report.extras["k"] == 2
    assert report.extras["predicted_slope"] == pytest.approx(expected, abs=1e-12)
    assert report.extras["slope"] == pytest.approx(expected, abs=0.05)
    assert report.exit_code == 0


def test_quartic_knapp_slope_on_flat_direction(quartic):
    report = knapp_scan(quartic, 10.0 / 9.0, 2.0)
    assert report.extras["k"] == 4
    assert report.extras["slope"] == pytest.approx(0.0, abs=0.05)


def test_knapp_scan_with_bump_profile(circle):
    report = knapp_scan(circle, 1.2, 2.0, profile="bump")
    assert report.extras["valid_rows"] == len(DEFAULT_DELTAS)
    assert report.extras["slope"] == pytest.approx(0.0, abs=0.05)
    assert report.exit_code == 0


def test_knapp_scan_on_the_cone_critical_line(circle):
    # p' = 5, q = p'/3
    report = knapp_scan(circle, 1.25, 5.0 / 3.0)
    assert report.extras["valid_rows"] == len(DEFAULT_DELTAS)
    assert report.extras["predicted_slope"] == pytest.approx(0.0, abs=1e-12)
    assert report.extras["slope"] == pytest.approx(0.0, abs=0.05)
    assert report.exit_code == 0


def test_knapp_scan_is_worker_independent(circle):
    serial = knapp_scan(circle, 1.2, 2.0, workers=1)
    pooled = knapp_scan(circle, 1.2, 2.0, workers=2)
    assert serial.rows == pooled.rows


def test_knapp_scan_grid_validation(circle):
    with pytest.raises(FamilyError):
        knapp_scan(circle, 1.2, 2.0, deltas=DEFAULT_DELTAS[:3])
    with pytest.raises(FamilyError):
        knapp_scan(circle, 1.2, 2.0, deltas=[0.5, 0.25, 0.125, 0.0625, 0.03125])
    with pytest.raises(FamilyError):
        knapp_scan(circle, 1.2, 2.0, deltas=[0.125, 0.1, 0.05, 0.01, 0.005])


def test_critical_q_on_circle(circle):
    report = critical_q_scan(circle, 1.2, [1.6, 1.8, 2.0, 2.2, 2.4])
    assert report.extras["predicted_critical_q"] == pytest.approx(2.0)
    assert report.extras["critical_q"] == pytest.approx(2.0, rel=0.05)


def test_critical_q_on_flat_cap(quartic):
    # p' = 10 and k = 4, so the slope changes sign at q = p'/5
    report = critical_q_scan(quartic, 10.0 / 9.0, [1.6, 1.8, 2.0, 2.2, 2.4])
    assert report.extras["k"] == 4
    assert report.extras["predicted_critical_q"] == pytest.approx(2.0)
    assert report.extras["critical_q"] == pytest.approx(2.0, rel=0.05)
    assert report.exit_code == 0


def test_critical_ratio_is_flat_between_large_caps(circle):
    mu = WeightedConeMeasure.unweighted(circle)
    coarse = family_ratio(circle, knapp_cap(circle, 0.0, 1 / 4), 1.2, 2.0, mu)
    fine = family_ratio(circle, knapp_cap(circle, 0.0, 1 / 8), 1.2, 2.0, mu)
    assert coarse.converged and fine.converged
    assert abs(fine.ratio / coarse.ratio - 1.0) <= 0.15
