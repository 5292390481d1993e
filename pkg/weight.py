# weight.py
"""Affine weight w(ξ) = <adj(∇²φ) ∇φ, ∇φ> φ and its curvature / covariance checks."""
from __future__ import annotations

import logging
from enum import Enum

import numpy as np
from scipy.optimize import newton

from utils.gauge import Gauge, GaugeError, linear_image_spec, make_gauge, sigma_point
from utils.generator import random_linear_maps, random_unit_vectors

logger = logging.getLogger(__name__)

CURVATURE_FLOOR = 1e-12
MIN_COVARIANCE_DET = 1e-6


class WeightConvention(Enum):
    POSITIVE_ADJUGATE = "positive-adjugate"
    NEGATIVE_ADJUGATE = "negative-adjugate"

    @property
    def sign(self) -> float:
        return 1.0 if self is WeightConvention.POSITIVE_ADJUGATE else -1.0

    @classmethod
    def parse(cls, text: str | "WeightConvention") -> "WeightConvention":
        if isinstance(text, cls):
            return text
        try:
            return cls(text)
        except ValueError:
            raise GaugeError(f"unknown weight convention '{text}'") from None


DEFAULT_CONVENTION = WeightConvention.POSITIVE_ADJUGATE


def adjugate(a: np.ndarray) -> np.ndarray:
    """Classical adjugate (transpose of the cofactor matrix), batched over leading axes."""
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    if n == 1:
        return np.ones_like(a)
    if n == 2:
        out = np.empty_like(a)
        out[..., 0, 0] = a[..., 1, 1]
        out[..., 1, 1] = a[..., 0, 0]
        out[..., 0, 1] = -a[..., 0, 1]
        out[..., 1, 0] = -a[..., 1, 0]
        return out
    cof = np.empty_like(a)
    for i in range(n):
        rows = np.delete(a, i, axis=-2)
        for j in range(n):
            minor = np.delete(rows, j, axis=-1)
            cof[..., i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return np.swapaxes(cof, -1, -2)


def weight_matrix(g: Gauge, xi, conv: WeightConvention = DEFAULT_CONVENTION) -> np.ndarray:
    _, _, hess = g.jet(xi)
    return conv.sign * adjugate(hess)


def weight(g: Gauge, xi, conv: WeightConvention = DEFAULT_CONVENTION) -> np.ndarray:
    value, grad, hess = g.jet(xi)
    m = conv.sign * adjugate(hess)
    return np.einsum("...i,...ij,...j->...", grad, m, grad) * value


# ---------- curvature identity ----------

def curvature_identity_residual(g: Gauge, theta, conv: WeightConvention = DEFAULT_CONVENTION):
    """|κ - w/|∇φ|^3| / max(κ, 1e-12) along Σ at polar angle(s) θ."""
    if g.dimension != 2:
        raise GaugeError("planar identity needs a 2D gauge; use curvature_identity_residual_nd")
    sample = sigma_point(g, theta)
    _, grad, _ = g.jet(sample.point)
    predicted = weight(g, sample.point, conv) / np.linalg.norm(grad, axis=-1) ** 3
    return np.abs(sample.curvature - predicted) / np.maximum(sample.curvature, CURVATURE_FLOOR)


def _tangent_frame(normal: np.ndarray) -> np.ndarray:
    n = normal.size
    q, _ = np.linalg.qr(np.column_stack((normal, np.eye(n))))
    return q[:, 1:n]


def gaussian_curvature_graph(g: Gauge, point, step: float = 1e-2) -> float:
    """Gauss curvature of Σ at ``point`` from Σ written as a graph over its tangent plane.

    Σ is locally {p + B u + h(u) N}; h is found by Newton along N and its
    Hessian by Richardson-extrapolated central differences.
    """
    p = np.asarray(point, dtype=float)
    n = p.size
    _, grad, _ = g.jet(p)
    normal = grad / np.linalg.norm(grad)
    frame = _tangent_frame(normal)
    m = n - 1

    def height(offsets: np.ndarray) -> np.ndarray:
        base = p + offsets @ frame.T

        def f(s):
            return g(base + s[:, None] * normal) - 1.0

        def fprime(s):
            return g.jet(base + s[:, None] * normal)[1] @ normal

        return newton(f, np.zeros(len(offsets)), fprime=fprime, tol=1e-15, maxiter=50)

    def derivatives(h: float) -> tuple[np.ndarray, np.ndarray]:
        eye = np.eye(m) * h
        stencil = [np.zeros(m)]
        for i in range(m):
            stencil += [eye[i], -eye[i]]
            for j in range(i + 1, m):
                stencil += [eye[i] + eye[j], eye[i] - eye[j], -eye[i] + eye[j], -eye[i] - eye[j]]
        vals = height(np.array(stencil))
        centre = vals[0]
        hess = np.empty((m, m))
        grad_h = np.empty(m)
        pos = 1
        index = {}
        for i in range(m):
            index[i] = pos
            pos += 2
            for j in range(i + 1, m):
                index[(i, j)] = pos
                pos += 4
        for i in range(m):
            plus, minus = vals[index[i]], vals[index[i] + 1]
            grad_h[i] = (plus - minus) / (2 * h)
            hess[i, i] = (plus - 2 * centre + minus) / h ** 2
            for j in range(i + 1, m):
                pp, pm, mp, mm = vals[index[(i, j)]:index[(i, j)] + 4]
                hess[i, j] = hess[j, i] = (pp - pm - mp + mm) / (4 * h * h)
        return grad_h, hess

    g1, h1 = derivatives(step)
    g2, h2 = derivatives(step / 2)
    grad_h = (4 * g2 - g1) / 3
    hess_h = (4 * h2 - h1) / 3
    # outward normal: h <= 0 near p, so -Hess h is the shape operator
    return float(np.linalg.det(-hess_h) / (1.0 + grad_h @ grad_h) ** ((m + 2) / 2))


def curvature_identity_residual_nd(g: Gauge, point, conv: WeightConvention = DEFAULT_CONVENTION) -> float:
    """Same identity in dimension n: κ = w/|∇φ|^{n+1}, κ from the graph parametrisation."""
    p = np.asarray(point, dtype=float)
    kappa = gaussian_curvature_graph(g, p)
    _, grad, _ = g.jet(p)
    predicted = float(weight(g, p, conv)) / float(np.linalg.norm(grad)) ** (p.size + 1)
    return abs(kappa - predicted) / max(kappa, CURVATURE_FLOOR)


# ---------- affine covariance ----------

def affine_covariance_residual(g: Gauge, X, xi, conv: WeightConvention = DEFAULT_CONVENTION) -> float:
    """|w_{φ∘X}(ξ) - det(X)^2 w_φ(Xξ)| / max(|det(X)^2 w_φ(Xξ)|, 1e-12)."""
    X = np.asarray(X, dtype=float)
    det = float(np.linalg.det(X))
    if abs(det) < MIN_COVARIANCE_DET:
        raise GaugeError(f"near-singular map in covariance check (|det X| = {abs(det):.3e})")
    composed = make_gauge(linear_image_spec(g.spec, X))
    xi = np.asarray(xi, dtype=float)
    lhs = float(weight(composed, xi, conv))
    rhs = det * det * float(weight(g, X @ xi, conv))
    return abs(lhs - rhs) / max(abs(rhs), CURVATURE_FLOOR)


def covariance_suite(g: Gauge, count: int = 100, seed: int = 0,
                     conv: WeightConvention = DEFAULT_CONVENTION) -> list[tuple[float, float]]:
    """(det X, residual) for ``count`` seeded random maps, entries in [-2, 2]."""
    rng = np.random.default_rng(seed)
    maps = random_linear_maps(rng, count, g.dimension)
    points = random_unit_vectors(rng, count, g.dimension)
    out = []
    for X, xi in zip(maps, points):
        out.append((float(np.linalg.det(X)), affine_covariance_residual(g, X, xi, conv)))
    return out


# 直接运行脚本：举个示例
if __name__ == "__main__":
    from utils.gauge import superellipse_spec
    circle = make_gauge("circle")
    quartic = make_gauge(superellipse_spec(4))
    xi = np.array([[1.0, 0.0], [1.0, 1.0], [0.3, -2.0]])
    print(f"[WEIGHT] circle w = {weight(circle, xi)}")
    print(f"[WEIGHT] superellipse(4) w = {weight(quartic, xi)}, "
          f"identity residual at π/4 = {float(curvature_identity_residual(quartic, np.pi / 4)):.3e}")
