# gauge.py
"""Convex gauges (Minkowski functionals) and the boundary curve Σ = {φ = 1}.

A gauge is built from a ``GaugeSpec`` (kind + params), which can be read
from inline JSON or from a file, the same way graphs used to be loaded from
edge lists. All jets are vectorised over leading axes.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar

logger = logging.getLogger(__name__)

KINDS = ("circle", "linear-image", "superellipse", "radial")
ORIGIN_GUARD = 1e-8
SINGULAR_GUARD = 1e-12
AUDIT_POINTS = 4096


class GaugeError(ValueError):
    """Malformed gauge description or evaluation outside the domain."""


@dataclass(frozen=True)
class GaugeSpec:
    kind: str
    params: dict = field(default_factory=dict)
    label: str = ""

    def to_dict(self) -> dict[str, Any]:
        out = {"kind": self.kind, "params": self.params}
        if self.label:
            out["label"] = self.label
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GaugeSpec":
        if "kind" not in data:
            raise GaugeError(f"gauge description without 'kind': {data}")
        return cls(str(data["kind"]), dict(data.get("params", {})), str(data.get("label", "")))

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind == "superellipse":
            return f"superellipse({self.params.get('k', 4)})"
        return self.kind


def circle_spec(dimension: int = 2) -> GaugeSpec:
    return GaugeSpec("circle", {"dimension": dimension})


def superellipse_spec(k: int = 4) -> GaugeSpec:
    return GaugeSpec("superellipse", {"k": k})


def radial_spec(cos: list[float], sin: list[float] | None = None, label: str = "") -> GaugeSpec:
    return GaugeSpec("radial", {"cos": list(cos), "sin": list(sin or [])}, label)


def linear_image_spec(base: GaugeSpec, matrix, label: str = "") -> GaugeSpec:
    return GaugeSpec("linear-image",
                     {"base": base.to_dict(), "matrix": np.asarray(matrix, dtype=float).tolist()},
                     label)


def ellipse_spec(a: float = 2.0, b: float = 1.0) -> GaugeSpec:
    """Ellipse with semi-axes a, b as the linear image of the circle."""
    return linear_image_spec(circle_spec(2), np.diag([1.0 / a, 1.0 / b]), f"ellipse({a:g},{b:g})")


def load_spec(source: str) -> GaugeSpec:
    """Inline JSON (``{...}``), a JSON file, or one of the short names."""
    text = source.strip()
    short = {"circle": circle_spec(2), "ellipse": ellipse_spec(),
             "sphere": circle_spec(3), "superellipse": superellipse_spec(4)}
    if text in short:
        return short[text]
    if text.startswith("superellipse(") and text.endswith(")"):
        return superellipse_spec(int(text[len("superellipse("):-1]))
    if not text.startswith("{"):
        path = Path(text)
        if not path.is_file():
            raise GaugeError(f"gauge file not found: {source}")
        text = path.read_text(encoding="utf-8")
    try:
        return GaugeSpec.from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise GaugeError(f"cannot parse gauge description: {exc}") from exc


# ---------- the gauge itself ----------

class Gauge:
    """Positively 1-homogeneous convex function with closed-form jet."""

    def __init__(self, spec: GaugeSpec):
        if spec.kind not in KINDS:
            raise GaugeError(f"unknown gauge kind '{spec.kind}', expected one of {KINDS}")
        self.spec = spec
        self.kind = spec.kind
        self._flat: list[float] | None = None
        getattr(self, "_setup_" + self.kind.replace("-", "_"))(spec.params)

    def __repr__(self) -> str:
        return f"Gauge({self.spec.name}, n={self.dimension})"

    # --- construction per kind ---
    def _setup_circle(self, params: dict) -> None:
        self.dimension = int(params.get("dimension", 2))
        if not 2 <= self.dimension <= 4:
            raise GaugeError(f"circle gauge needs 2 <= n <= 4, got {self.dimension}")

    def _setup_linear_image(self, params: dict) -> None:
        if "base" not in params or "matrix" not in params:
            raise GaugeError("linear-image gauge needs 'base' and 'matrix'")
        base = params["base"]
        self._base = Gauge(base if isinstance(base, GaugeSpec) else GaugeSpec.from_dict(base))
        self._matrix = np.asarray(params["matrix"], dtype=float)
        n = self._base.dimension
        if self._matrix.shape != (n, n):
            raise GaugeError(f"matrix shape {self._matrix.shape} does not match base dimension {n}")
        det = float(np.linalg.det(self._matrix))
        if abs(det) <= SINGULAR_GUARD:
            raise GaugeError(f"singular linear image (|det X| = {abs(det):.3e})")
        self.determinant = det
        self.dimension = n

    def _setup_superellipse(self, params: dict) -> None:
        k = params.get("k", 4)
        if int(k) != k or int(k) < 2 or int(k) % 2:
            raise GaugeError(f"superellipse exponent must be an even integer >= 2, got {k}")
        self._k = int(k)
        self.dimension = 2

    def _setup_radial(self, params: dict) -> None:
        cos = np.asarray(params.get("cos", []), dtype=float)
        sin = np.asarray(params.get("sin", []), dtype=float)
        if cos.size == 0:
            raise GaugeError("radial gauge needs at least the constant coefficient in 'cos'")
        size = max(cos.size, sin.size + 1)
        self._cos = np.zeros(size)
        self._cos[:cos.size] = cos
        self._sin = np.zeros(size)
        self._sin[1:sin.size + 1] = sin
        self.dimension = 2
        theta = 2.0 * np.pi * np.arange(AUDIT_POINTS) / AUDIT_POINTS
        r, r1, r2 = self.radial_function(theta)
        if r.min() <= 0:
            raise GaugeError(f"radial function not positive (min r = {r.min():.3e})")
        convexity = r * r + 2.0 * r1 * r1 - r * r2
        if convexity.min() < -1e-12:
            worst = float(theta[np.argmin(convexity)])
            raise GaugeError(f"radial gauge is not convex near theta = {worst:.4f}")

    def radial_function(self, theta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """r(θ) and its first two derivatives (radial kind only)."""
        theta = np.asarray(theta, dtype=float)
        m = np.arange(self._cos.size)
        c = np.cos(theta[..., None] * m)
        s = np.sin(theta[..., None] * m)
        r = c @ self._cos + s @ self._sin
        r1 = (-s * m) @ self._cos + (c * m) @ self._sin
        r2 = -(c * m * m) @ self._cos - (s * m * m) @ self._sin
        return r, r1, r2

    # --- evaluation ---
    def jet(self, xi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(φ, ∇φ, ∇²φ) at ξ of shape (..., n)."""
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self.dimension:
            raise GaugeError(f"expected points in R^{self.dimension}, got shape {xi.shape}")
        if np.any(np.linalg.norm(xi, axis=-1) < ORIGIN_GUARD):
            raise GaugeError("gauge jet requested at (or too close to) the origin")
        return self._jet(xi)

    def __call__(self, xi) -> np.ndarray:
        return self.jet(xi)[0]

    def _jet(self, xi: np.ndarray):
        return getattr(self, "_jet_" + self.kind.replace("-", "_"))(xi)

    def _jet_circle(self, xi):
        r = np.linalg.norm(xi, axis=-1)
        grad = xi / r[..., None]
        eye = np.eye(self.dimension)
        hess = (eye - grad[..., :, None] * grad[..., None, :]) / r[..., None, None]
        return r, grad, hess

    def _jet_linear_image(self, xi):
        X = self._matrix
        value, grad_b, hess_b = self._base._jet(xi @ X.T)
        return value, grad_b @ X, X.T @ hess_b @ X

    def _jet_superellipse(self, xi):
        k = self._k
        xk = xi ** k
        S = xk.sum(axis=-1)
        value = S ** (1.0 / k)
        grad = xi ** (k - 1) * (S ** (1.0 / k - 1.0))[..., None]
        c = (k - 1) * S ** (1.0 / k - 2.0)
        # off-axis products avoid S - xi^k cancellation
        diag = xi ** (k - 2) * xk[..., ::-1]
        odd = xi ** (k - 1)
        hess = np.empty(xi.shape + (2,))
        hess[..., 0, 0] = c * diag[..., 0]
        hess[..., 1, 1] = c * diag[..., 1]
        hess[..., 0, 1] = hess[..., 1, 0] = -c * odd[..., 0] * odd[..., 1]
        return value, grad, hess

    def _jet_radial(self, xi):
        rho = np.hypot(xi[..., 0], xi[..., 1])
        theta = np.arctan2(xi[..., 1], xi[..., 0])
        r, r1, r2 = self.radial_function(theta)
        h = 1.0 / r
        h1 = -r1 / r ** 2
        curv = (r * r + 2.0 * r1 * r1 - r * r2) / r ** 3      # h + h''
        e_rho = np.stack((np.cos(theta), np.sin(theta)), axis=-1)
        e_th = np.stack((-np.sin(theta), np.cos(theta)), axis=-1)
        value = rho * h
        grad = h[..., None] * e_rho + h1[..., None] * e_th
        hess = (curv / rho)[..., None, None] * e_th[..., :, None] * e_th[..., None, :]
        return value, grad, hess

    # --- geometry of Σ ---
    def flat_directions(self) -> list[float]:
        """Polar angles (in [0, 2π)) of the points where Σ has vanishing curvature."""
        if self._flat is None:
            self._flat = sorted(float(np.mod(t, 2 * np.pi)) for t in self._flat_directions())
        return list(self._flat)

    def _flat_directions(self) -> list[float]:
        if self.dimension != 2:
            return []
        if self.kind == "circle":
            return []
        if self.kind == "superellipse":
            return [] if self._k == 2 else [0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi]
        if self.kind == "linear-image":
            inv = np.linalg.inv(self._matrix)
            out = []
            for tb in self._base.flat_directions():
                v = inv @ np.array([np.cos(tb), np.sin(tb)])
                out.append(math.atan2(v[1], v[0]))
            return out
        report = convexity_audit(self)
        zeros = list(report.zeros)
        for a, b in report.flat_arcs:
            zeros.extend([a, b])
        return zeros


def make_gauge(spec: GaugeSpec | dict | str) -> Gauge:
    if isinstance(spec, Gauge):
        return spec
    if isinstance(spec, str):
        spec = load_spec(spec)
    elif isinstance(spec, dict):
        spec = GaugeSpec.from_dict(spec)
    return Gauge(spec)


def gauge_jet(g: Gauge, xi):
    return g.jet(xi)


def finite_difference_jet(g: Gauge, xi) -> tuple[float, np.ndarray, np.ndarray]:
    """Central-difference oracle for a single point, values of φ only."""
    xi = np.asarray(xi, dtype=float)
    n = xi.size
    scale = max(1.0, float(np.linalg.norm(xi)))
    h1, h2 = 1e-5 * scale, 1e-4 * scale
    eye = np.eye(n)
    value = float(g(xi))
    grad = np.array([(g(xi + h1 * eye[i]) - g(xi - h1 * eye[i])) / (2 * h1) for i in range(n)])
    hess = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            a, b = h2 * eye[i], h2 * eye[j]
            hess[i, j] = hess[j, i] = (g(xi + a + b) - g(xi + a - b)
                                       - g(xi - a + b) + g(xi - a - b)) / (4 * h2 * h2)
    return value, grad, hess


# ---------- boundary curve samples ----------

@dataclass(frozen=True)
class SigmaSample:
    """Point of Σ at polar angle θ with tangent, arclength element and curvature."""
    theta: np.ndarray
    point: np.ndarray
    tangent: np.ndarray
    arc_element: np.ndarray
    curvature: np.ndarray
    radius: np.ndarray           # R(θ) = 1 / φ(cos θ, sin θ)
    radius_prime: np.ndarray


def sigma_point(g: Gauge, theta) -> SigmaSample:
    if g.dimension != 2:
        raise GaugeError("sigma_point is defined for planar gauges")
    theta = np.asarray(theta, dtype=float)
    u = np.stack((np.cos(theta), np.sin(theta)), axis=-1)
    u_t = np.stack((-np.sin(theta), np.cos(theta)), axis=-1)
    psi, grad, hess = g._jet(u)
    psi1 = np.einsum("...i,...i->...", grad, u_t)
    quad = np.einsum("...i,...ij,...j->...", u_t, hess, u_t)    # ψ + ψ''
    R = 1.0 / psi
    R1 = -psi1 / psi ** 2
    arc = np.hypot(R, R1)
    point = R[..., None] * u
    tangent = (R1[..., None] * u + R[..., None] * u_t) / arc[..., None]
    # x'y'' - y'x'' = R^2 + 2R'^2 - R R'' = (ψ + ψ'')/ψ^3
    curvature = quad / psi ** 3 / arc ** 3
    return SigmaSample(theta, point, tangent, arc, curvature, R, R1)


# ---------- convexity audit ----------

@dataclass
class ConvexityReport:
    min_curvature: float
    max_curvature: float
    zeros: list[float] = field(default_factory=list)
    zero_orders: list[float | None] = field(default_factory=list)
    flat_arcs: list[tuple[float, float]] = field(default_factory=list)

    @property
    def undetermined(self) -> bool:
        return bool(self.flat_arcs) or any(k is None for k in self.zero_orders)

    @property
    def contact_order(self) -> float | None:
        """Largest order of contact along Σ; 2 when Σ is curved everywhere."""
        if self.undetermined:
            return None
        return max(self.zero_orders, default=2.0)


def _curvature_at(g: Gauge, theta: float) -> float:
    return float(sigma_point(g, np.array([theta])).curvature[0])


def _fit_order(g: Gauge, theta0: float) -> float | None:
    deltas = np.geomspace(1e-3, 2e-2, 12)
    kap = np.concatenate((sigma_point(g, theta0 + deltas).curvature,
                          sigma_point(g, theta0 - deltas).curvature))
    if np.any(kap <= 0) or not np.all(np.isfinite(kap)):
        return None
    slope = np.polyfit(np.log(np.concatenate((deltas, deltas))), np.log(kap), 1)[0]
    return float(slope + 2.0)


def convexity_audit(g: Gauge, m: int = 1024) -> ConvexityReport:
    """Locate curvature zeros and flat arcs of Σ and estimate contact orders."""
    if m < 64:
        raise GaugeError(f"convexity audit needs m >= 64 samples, got {m}")
    step = 2.0 * np.pi / m
    theta = step * np.arange(m)
    sample = sigma_point(g, theta)
    kappa = sample.curvature
    kmax = float(kappa.max())
    report = ConvexityReport(float(kappa.min()), kmax)

    flat = kappa < 1e-12
    if flat.all():
        report.flat_arcs.append((0.0, 2.0 * np.pi))
        return report
    on_arc = np.zeros(m, dtype=bool)
    if flat.any():
        start = int(np.argmin(flat))        # first curved sample; runs wrap around
        order = np.roll(np.arange(m), -start)
        run: list[int] = []
        for idx in list(order) + [start]:
            if flat[idx]:
                run.append(idx)
            elif run:
                length = float(np.sum(sample.arc_element[run]) * step)
                if length > step:
                    report.flat_arcs.append((float(theta[run[0]]), float(theta[run[-1]])))
                    on_arc[run] = True
                run = []

    prev, nxt = np.roll(kappa, 1), np.roll(kappa, -1)
    candidates = np.flatnonzero((kappa <= prev) & (kappa <= nxt) & (kappa < 0.05 * kmax) & ~on_arc)
    last = -2
    for i in candidates:
        if i == last + 1:
            last = i
            continue
        last = i
        res = minimize_scalar(lambda t: _curvature_at(g, t), method="bounded",
                              bounds=(theta[i] - step, theta[i] + step),
                              options={"xatol": 1e-12})
        if res.fun < 1e-8 * kmax:
            t0 = float(np.mod(res.x, 2.0 * np.pi))
            report.zeros.append(t0)
            k_est = _fit_order(g, t0)
            if k_est is None:
                logger.warning("contact order at theta = %.6f undetermined", t0)
            report.zero_orders.append(k_est)
    logger.debug("convexity audit of %r: %d zeros, %d flat arcs", g, len(report.zeros), len(report.flat_arcs))
    return report
