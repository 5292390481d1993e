import numpy as np
import pytest

from utils.gauge import GaugeError, finite_difference_jet, make_gauge, superellipse_spec
from weight import (WeightConvention, adjugate, affine_covariance_residual, covariance_suite,
                    curvature_identity_residual, curvature_identity_residual_nd, weight,
                    weight_matrix)


def test_weight_matrix_on_circle_axis(circle):
    xi = np.array([1.0, 0.0])
    np.testing.assert_allclose(weight_matrix(circle, xi), np.diag([1.0, 0.0]), atol=1e-15)
    np.testing.assert_allclose(weight_matrix(circle, xi, WeightConvention.NEGATIVE_ADJUGATE),
                               np.diag([-1.0, 0.0]), atol=1e-15)


def test_circle_weight_is_one_everywhere(circle):
    xi = np.random.default_rng(5).normal(size=(200, 2))
    np.testing.assert_allclose(weight(circle, xi), 1.0, rtol=1e-12)


def test_negative_convention_flips_sign(quartic):
    xi = np.array([0.6, 0.8])
    assert weight(quartic, xi, WeightConvention.NEGATIVE_ADJUGATE) == pytest.approx(-weight(quartic, xi))


def test_superellipse_weight_vanishes_on_axis(quartic):
    assert weight(quartic, np.array([1.0, 0.0])) == 0.0
    assert weight(quartic, np.array([1.0, 1.0])) > 0.0


def test_ellipse_weight(ellipse):
    # (det X)^2 with X = diag(1/2, 1), since the circle has w ≡ 1
    xi = np.array([[2.0, 0.0], [0.3, 0.7], [-1.0, 4.0]])
    np.testing.assert_allclose(weight(ellipse, xi), 0.25, rtol=1e-12)


def test_weight_matrix_matches_finite_difference_adjugate(tilted_quartic):
    for xi in (np.array([1.0, 0.4]), np.array([-0.3, 1.1])):
        _, _, fd_hess = finite_difference_jet(tilted_quartic, xi)
        np.testing.assert_allclose(weight_matrix(tilted_quartic, xi), adjugate(fd_hess),
                                   rtol=1e-6, atol=1e-6)


def test_adjugate_three_by_three():
    a = np.array([[2.0, 1.0, 0.0], [0.5, 3.0, -1.0], [1.0, 0.0, 4.0]])
    np.testing.assert_allclose(adjugate(a), np.linalg.det(a) * np.linalg.inv(a), rtol=1e-12)


def test_weight_is_homogeneous_of_degree_two_minus_n(sphere):
    xi = np.array([0.3, -0.5, 0.9])
    # n = 3: w(λξ) = w(ξ)/λ, and w = 1/|ξ| on the round cone
    assert weight(sphere, 2.5 * xi) == pytest.approx(weight(sphere, xi) / 2.5, rel=1e-12)
    assert weight(sphere, xi) == pytest.approx(1.0 / np.linalg.norm(xi), rel=1e-12)


def test_convention_parse():
    assert WeightConvention.parse("negative-adjugate") is WeightConvention.NEGATIVE_ADJUGATE
    with pytest.raises(GaugeError):
        WeightConvention.parse("signed")


# ---------- curvature identity ----------

def test_identity_on_circle(circle):
    theta = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
    assert np.max(curvature_identity_residual(circle, theta)) <= 1e-10


def test_identity_on_superellipse_diagonal(quartic):
    assert float(curvature_identity_residual(quartic, np.pi / 4)) <= 1e-6


def test_identity_at_flat_point(sextic):
    # κ = 0 and w = 0: the residual is measured against the floor
    assert float(curvature_identity_residual(sextic, 0.0)) == 0.0


def test_identity_rejects_higher_dimension(sphere):
    with pytest.raises(GaugeError):
        curvature_identity_residual(sphere, 0.0)


def test_identity_on_sphere(sphere):
    for point in (np.array([0.0, 0.0, 1.0]), np.array([0.6, 0.0, 0.8]), np.array([1.0, 1.0, 1.0]) / np.sqrt(3)):
        assert curvature_identity_residual_nd(sphere, point) <= 1e-8


# ---------- affine covariance ----------

def test_covariance_identity_map_is_exact(quartic):
    assert affine_covariance_residual(quartic, np.eye(2), np.array([0.6, 0.8])) <= 1e-14


def test_covariance_diagonal_map_on_circle(circle):
    assert affine_covariance_residual(circle, np.diag([0.5, 1.0]), np.array([1.0, 1.0])) <= 1e-8


def test_covariance_suite_on_superellipse():
    rows = covariance_suite(make_gauge(superellipse_spec(4)), count=100, seed=0)
    assert len(rows) == 100
    assert all(abs(det) >= 0.1 for det, _ in rows)
    assert max(res for _, res in rows) <= 1e-6


def test_covariance_suite_is_seeded(circle):
    assert covariance_suite(circle, count=10, seed=42) == covariance_suite(circle, count=10, seed=42)


def test_covariance_rejects_singular_map(circle):
    with pytest.raises(GaugeError):
        affine_covariance_residual(circle, np.array([[1.0, 2.0], [0.5, 1.0]]), np.array([1.0, 0.0]))
