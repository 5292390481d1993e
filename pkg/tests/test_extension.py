import math

import numpy as np
import pytest

from extension import (ConeDensity, FamilyError, OscillationBudgetError, Profile,
                       SeparableTestFamily, dual_lp_norm, extension_eval, extension_eval_sliced,
                       family_ratio, gaussian_family)
from measure import WeightedConeMeasure, cone_norm
from utils.quadrature import composite_gauss_legendre, uniform_breaks


# ---------- densities ----------

def test_density_validation():
    with pytest.raises(FamilyError):
        ConeDensity("lorentzian")
    with pytest.raises(FamilyError):
        ConeDensity(scale=-1.0)


def test_rescaled_density_is_a_dilation():
    u = ConeDensity("gaussian", 1.5, angular=0.3)
    xi = np.array([[0.4, -0.2], [1.0, 2.0]])
    t = np.array([0.5, 1.7])
    np.testing.assert_allclose(u.rescaled(2.0)(xi, t), u(2.0 * xi, 2.0 * t), rtol=1e-15)


# ---------- extension operator ----------

def test_zero_density_extends_to_zero(circle):
    res = extension_eval(circle, ConeDensity("zero"), np.array([0.3, 0.1]), 0.5, WeightedConeMeasure(circle))
    assert res.value == 0 and res.converged


def test_closed_form_at_the_axis(circle):
    # u = e^{-2πφ} on the round cone: (u dμ)ˇ(0, t) = 1/(1 - it)
    res = extension_eval(circle, ConeDensity(), np.zeros(2), 1.0, WeightedConeMeasure(circle))
    assert res.converged
    assert abs(complex(res.value) - (0.5 + 0.5j)) <= 1e-6


def test_closed_form_sliced(circle):
    res = extension_eval_sliced(circle, ConeDensity(), np.zeros(2), -2.0, WeightedConeMeasure(circle))
    assert abs(complex(res.value) - 1.0 / (1.0 + 2.0j)) <= 1e-6


def test_conjugate_symmetry_for_real_densities(quartic):
    mu = WeightedConeMeasure(quartic)
    u = ConeDensity("gaussian", 1.0)
    x = np.array([0.4, -0.7])
    a = complex(extension_eval(quartic, u, x, 0.9, mu).value)
    b = complex(extension_eval(quartic, u, -x, -0.9, mu).value)
    assert abs(a - b.conjugate()) <= 1e-10 * max(abs(a), 1.0)


@pytest.mark.parametrize("fixture, limit", [("circle", 1e-5), ("ellipse", 1e-5), ("quartic", 1e-4)])
def test_direct_and_sliced_agree(fixture, limit, request):
    g = request.getfixturevalue(fixture)
    mu = WeightedConeMeasure(g)
    u = ConeDensity("gaussian", 1.0)
    floor = 1e-3 * float(cone_norm(u, mu, 1.0).value)
    for x, t in ((np.array([0.5, -0.3]), 0.7), (np.array([-1.1, 0.2]), -1.4), (np.array([0.0, 1.3]), 1.9)):
        d = complex(extension_eval(g, u, x, t, mu).value)
        s = complex(extension_eval_sliced(g, u, x, t, mu).value)
        assert abs(d - s) / max(abs(d), floor) <= limit


def test_compact_support_agrees(quartic):
    mu = WeightedConeMeasure.corollary(quartic)
    u = ConeDensity("exponential", 1.0, angular=0.4)
    x = np.array([0.3, 0.6])
    d = complex(extension_eval(quartic, u, x, -0.8, mu).value)
    s = complex(extension_eval_sliced(quartic, u, x, -0.8, mu).value)
    assert abs(d - s) <= 1e-4 * abs(d)


def test_scaling_law(ellipse):
    # dξ/φ has degree 1: λ · (u_λ dμ)ˇ(λx, λt) = (u dμ)ˇ(x, t) with u_λ(ξ, t) = u(λξ, λt)
    mu = WeightedConeMeasure(ellipse)
    u = ConeDensity("gaussian", 1.0)
    lam = 2.0
    x, t = np.array([0.2, 0.1]), 0.5
    base = complex(extension_eval(ellipse, u, x, t, mu).value)
    scaled = complex(extension_eval(ellipse, u.rescaled(lam), lam * x, lam * t, mu).value)
    assert abs(lam * scaled - base) <= 1e-6 * abs(base)


def test_trivial_bound(quartic):
    mu = WeightedConeMeasure(quartic)
    u = ConeDensity()
    bound = float(cone_norm(u, mu, 1.0).value)
    for x, t in ((np.zeros(2), 0.0), (np.array([0.3, 0.2]), 0.5), (np.array([2.0, -1.0]), 3.0)):
        assert abs(complex(extension_eval(quartic, u, x, t, mu).value)) <= bound * (1 + 1e-8)


def test_at_origin_equals_total_mass(circle):
    mu = WeightedConeMeasure(circle)
    u = ConeDensity()
    value = complex(extension_eval(circle, u, np.zeros(2), 0.0, mu).value)
    assert value == pytest.approx(float(cone_norm(u, mu, 1.0).value), rel=1e-8)


def test_oscillation_budget(circle):
    with pytest.raises(OscillationBudgetError):
        extension_eval(circle, ConeDensity(), np.array([2000.0, 0.0]), 0.0, WeightedConeMeasure(circle))
    with pytest.raises(OscillationBudgetError):
        extension_eval_sliced(circle, ConeDensity(), np.zeros(2), -5000.0, WeightedConeMeasure(circle))


# ---------- profiles and separable families ----------

def test_profile_validation():
    with pytest.raises(FamilyError):
        Profile("box")
    with pytest.raises(FamilyError):
        Profile(width=0.0)


def test_bump_profile_peak_and_support():
    b = Profile("bump", center=1.0, width=0.5)
    assert float(b(1.0)) == pytest.approx(1.0, rel=1e-15)
    assert float(b(1.6)) == 0.0 and float(b(0.4)) == 0.0


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_gaussian_dual_norm_against_quadrature(p):
    pr = Profile("gaussian", 0.0, 0.5)
    res = dual_lp_norm(pr, 6.0 * pr.width, p, pr.dual_reach / pr.width)
    assert float(res.value) == pytest.approx(pr.dual_norm(p), rel=1e-6)


def test_bump_dual_norm_obeys_plancherel():
    x, w = composite_gauss_legendre(uniform_breaks(-1.0, 1.0, 64))
    l2 = float(np.sqrt(np.sum(w * Profile("bump")(x) ** 2)))
    assert Profile("bump").dual_norm(2.0) == pytest.approx(l2, rel=1e-5)


@pytest.mark.parametrize("p", [1.1, 1.2, 1.5, 3.0])
def test_bump_dual_norm_is_certified(p):
    # the transform of the bump changes sign, so |ǧ|^p has cusps at its zeros
    pr = Profile("bump")
    res = dual_lp_norm(pr, pr.half_support, p, pr.dual_reach)
    assert res.converged
    shifted = dual_lp_norm(Profile("bump", 0.7), 1.0, p, pr.dual_reach, center=0.7)
    assert float(shifted.value) == pytest.approx(float(res.value), rel=1e-8)


def test_bump_dual_norm_endpoints():
    pr = Profile("bump")
    x, w = composite_gauss_legendre(uniform_breaks(-1.0, 1.0, 64))
    mass = float(np.sum(w * pr(x)))
    assert float(dual_lp_norm(pr, 1.0, math.inf, pr.dual_reach).value) == pytest.approx(mass, rel=1e-10)
    # Hausdorff–Young: ‖ǧ‖_4 <= ‖g‖_{4/3}
    l43 = float(np.sum(w * pr(x) ** (4.0 / 3.0))) ** 0.75
    assert pr.dual_norm(4.0) <= l43


def test_separable_norm_closed_form_vs_quadrature():
    fam = SeparableTestFamily((Profile(), Profile("gaussian", 0.3, 1.0), Profile("gaussian", 1.5, 0.5)),
                              scales=(2.0, 1.0, 0.5),
                              shear=((1.0, 0.5, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)))
    for p in (1.5, 2.0, 4.0):
        assert float(fam.quadrature_lp_norm(p).value) == pytest.approx(fam.lp_norm(p), rel=1e-5)


def test_family_rejects_non_unimodular_shear():
    with pytest.raises(FamilyError):
        SeparableTestFamily((Profile(), Profile(), Profile()),
                            shear=((2.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)))


def test_family_rejects_size_mismatch():
    with pytest.raises(FamilyError):
        SeparableTestFamily((Profile(), Profile()))


# ---------- restriction ratios ----------

def test_zero_family_ratio(circle):
    fam = SeparableTestFamily((Profile(), Profile("zero"), Profile()))
    res = family_ratio(circle, fam, 2.0, 2.0, WeightedConeMeasure.corollary(circle))
    assert res.ratio == 0.0 and res.converged


def test_gaussian_family_ratio_is_stable_under_refinement(circle):
    fam = gaussian_family()
    mu = WeightedConeMeasure.corollary(circle)
    coarse = family_ratio(circle, fam, 2.0, 2.0, mu, scheme=(16, 128))
    fine = family_ratio(circle, fam, 2.0, 2.0, mu, scheme=(32, 256))
    assert coarse.converged and fine.converged
    assert coarse.ratio > 0
    assert abs(coarse.ratio - fine.ratio) <= 1e-4 * fine.ratio


def test_height_envelope_of_families():
    fam = gaussian_family()
    assert fam.envelope(1.0) == 1.0
    assert fam.envelope(2.5) == pytest.approx(np.exp(-4.0 * np.pi), rel=1e-14)
    assert fam.decay_length == 0.5
    bump = SeparableTestFamily((Profile("bump"), Profile("bump"), Profile("bump", 1.5, 0.5)))
    assert bump.envelope(1.75) > 0.0
    assert bump.envelope(2.0) == 0.0


def test_family_ratio_on_the_full_cone(circle):
    # |F̂|^2 on the circle cone is e^{-2π t^2} e^{-8π (t - 1.5)^2}, integrated against dt dθ
    res = family_ratio(circle, gaussian_family(), 2.0, 2.0, WeightedConeMeasure(circle))
    assert res.converged
    exact = math.sqrt(2.0 * np.pi * math.exp(-3.6 * np.pi) * 0.5 * math.sqrt(0.1)
                      * (1.0 + math.erf(1.2 * math.sqrt(10.0 * np.pi))))
    assert res.numerator == pytest.approx(exact, rel=1e-7)
    assert res.ratio == pytest.approx(exact / gaussian_family().lp_norm(2.0), rel=1e-7)


def test_full_cone_ratio_needs_a_height_factor(circle):
    sheared = SeparableTestFamily((Profile(), Profile(), Profile("gaussian", 1.5, 0.5)),
                                  shear=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.5, 0.0, 1.0)))
    assert sheared.height_factor is None
    with pytest.raises(FamilyError):
        family_ratio(circle, sheared, 2.0, 2.0, WeightedConeMeasure(circle))
    bounded = WeightedConeMeasure(circle, t_max=6.0)
    assert family_ratio(circle, sheared, 2.0, 2.0, bounded).ratio > 0


def test_family_ratio_rejects_bad_exponents(circle):
    with pytest.raises(FamilyError):
        family_ratio(circle, gaussian_family(), 0.5, 2.0, WeightedConeMeasure.corollary(circle))
