# families.py
"""Knapp caps, critical-exponent algebra and the dyadic optimisation behind the
weighted restriction bounds for cones over finite-type curves."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, newton

from extension import FamilyError, Profile, SeparableTestFamily, family_ratio
from measure import WeightedConeMeasure
from utils.gauge import Gauge, GaugeError, make_gauge, sigma_point
from utils.quadrature import parallel_map
from utils.report import ScanReport

logger = logging.getLogger(__name__)

DEFAULT_DELTAS = tuple(2.0 ** -j for j in range(3, 10))
SLOPE_TOLERANCE = 0.05
WINDOW_CUTOFF = 4.0
HEIGHT_FLOOR = 1e-11


class ExponentError(ValueError):
    """Exponents outside the range where the requested identity is stated."""


def _conj(x):
    """Hölder conjugate; Fractions stay exact, 1 maps to infinity."""
    if x == 1:
        return math.inf
    return x / (x - 1)


def _close(a, b, tol: float = 1e-12) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) <= tol * max(1.0, abs(float(b)))


# ---------- exponent pairs ----------

@dataclass(frozen=True)
class ExponentPair:
    p: float | Fraction
    q: float | Fraction
    k: int | None = None

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ExponentError(f"need p, q >= 1, got p = {self.p}, q = {self.q}")

    @property
    def p_conj(self):
        return _conj(self.p)

    @property
    def q_conj(self):
        return _conj(self.q)

    def _k(self, k: int | None) -> int:
        k = self.k if k is None else k
        if k is None:
            raise ExponentError("type k not set")
        return k

    def is_cone_critical(self) -> bool:
        """q = p'/3, the non-degenerate cone line."""
        return _close(self.q, self.p_conj / 3)

    def is_type_k_critical(self, k: int | None = None) -> bool:
        return _close(self.q, self.p_conj / (self._k(k) + 1))

    def in_sharp_range(self, k: int | None = None) -> bool:
        """q <= p'/(k+1) and p' >= k+2."""
        k = self._k(k)
        return self.q <= self.p_conj / (k + 1) + 1e-12 and self.p_conj >= k + 2 - 1e-12

    def in_barcelo_range(self, k: int | None = None) -> bool:
        """The older, narrower range q <= p'/(k+1), p' >= 2k (non-weighted estimates)."""
        k = self._k(k)
        return self.q <= self.p_conj / (k + 1) + 1e-12 and self.p_conj >= 2 * k - 1e-12

    def knapp_slope(self, k: int | None = None) -> float:
        """Log-log slope of the Knapp ratio on a type-k cap: 1/q - (k+1)/p'."""
        k = self._k(k)
        return float(1.0 / self.q - (k + 1) / self.p_conj)


@dataclass(frozen=True)
class SubcriticalExponents:
    rho: float | Fraction
    tau: float | Fraction
    rho_conj: float | Fraction
    residuals: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return all(r <= 1e-12 for r in self.residuals.values())


def subcritical_exponents(p, q, k: int) -> SubcriticalExponents:
    """ρ = (k-2-p(k-3))/(k-1-p(k-2)) and τ = (q(k+1)-(k-2))/3 on the line q = p'/(k+1)."""
    if int(k) != k or k < 3:
        raise ExponentError(f"k must be an integer >= 3, got {k}")
    if not 1 < p < Fraction(k + 2, k + 1):
        raise ExponentError(f"need 1 < p < (k+2)/(k+1) = {(k + 2) / (k + 1):.6g}, got p = {p}")
    if not _close(q, _conj(p) / (k + 1)):
        raise ExponentError(f"off-critical pair: q = {q} but p'/(k+1) = {_conj(p) / (k + 1)}")
    rho = (k - 2 - p * (k - 3)) / (k - 1 - p * (k - 2))
    tau = (q * (k + 1) - (k - 2)) / 3
    rho_conj = _conj(rho)

    def res(a, b) -> float:
        return abs(float(a - b)) / max(1.0, abs(float(b)))

    residuals = {
        "tau_vs_rho_conj": res(tau, rho_conj / 3),
        "alpha_exponent": res(3 * (tau - 1) / (k + 1) + 1, q),
        "measure_exponent": res(3 * (tau / rho - 1) / (k + 1) + 1, q / p),
        "rho_range": 0.0 if 1 <= rho < Fraction(4, 3) else float("inf"),
    }
    return SubcriticalExponents(rho, tau, rho_conj, residuals)


# ---------- dyadic optimisation ----------

@dataclass(frozen=True)
class DyadicBound:
    J: int
    bound: float
    brute: float
    envelope: float

    @property
    def brute_ratio(self) -> float:
        return self.brute / self.bound

    @property
    def envelope_ratio(self) -> float:
        return self.bound / self.envelope


def dyadic_min_optimize(alpha: float, E: float, k: int, tau, rho,
                        occupied: Sequence[int] | None = None) -> DyadicBound:
    """Minimise S(J) = a_J + b_J, a_j = 2^{-j/3} α^{-τ} E^{τ/ρ}, b_j = 2^{j/(k-2)} α^{-1} E.

    With ``occupied`` bins the split sum Σ_{j>=J} a_j + Σ_{j<J} b_j over the
    occupied bins is minimised instead.
    """
    if alpha <= 0 or E <= 0:
        raise ExponentError("alpha and E must be positive")
    tau, rho = float(tau), float(rho)

    def a(j):
        return 2.0 ** (-np.asarray(j, dtype=float) / 3.0) * alpha ** -tau * E ** (tau / rho)

    def b(j):
        return 2.0 ** (np.asarray(j, dtype=float) / (k - 2)) * E / alpha

    if occupied is None:
        J = np.arange(-400, 401)
        S = a(J) + b(J)
        i = int(np.argmin(S))
        best_J, best = int(J[i]), float(S[i])
    else:
        bins = np.array(sorted(set(int(j) for j in occupied)))
        if bins.size == 0:
            raise ExponentError("no occupied bins")
        best_J, best = 0, math.inf
        for J in list(bins) + [int(bins[-1]) + 1]:
            S = float(np.sum(a(bins[bins >= J])) + np.sum(b(bins[bins < J])))
            if S < best:
                best_J, best = int(J), S
    j = np.arange(-60, 61) if occupied is None else np.array(sorted(set(occupied)))
    brute = float(np.sum(np.minimum(a(j), b(j))))
    q_line = 3.0 * (tau - 1.0) / (k + 1) + 1.0
    qp_line = 3.0 * (tau / rho - 1.0) / (k + 1) + 1.0
    envelope = alpha ** -q_line * E ** qp_line
    return DyadicBound(best_J, best, brute, envelope)


# ---------- Knapp caps ----------

def anisotropic_dilation(delta: float, n: int, sign: int = 1) -> np.ndarray:
    """Diagonal of δ̲^{±1}: δ^{3/2} on the first n-2 tangent coordinates, δ on the last."""
    if n < 2:
        raise FamilyError(f"dimension must be >= 2, got {n}")
    powers = np.array([1.5] * (n - 2) + [1.0])
    return delta ** (sign * powers)


def _sphere_directions(m: int) -> np.ndarray:
    if m == 1:
        return np.array([[1.0], [-1.0]])
    if m == 2:
        th = 2.0 * np.pi * np.arange(256) / 256
        return np.stack((np.cos(th), np.sin(th)), axis=-1)
    # Fibonacci lattice on S^2
    count = 512
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    phi = np.pi * (1.0 + 5.0 ** 0.5) * i
    r = np.sqrt(1.0 - z * z)
    return np.stack((r * np.cos(phi), r * np.sin(phi), z), axis=-1)


@dataclass
class KnappParams:
    """Σ near a cap point written as the graph v = γ(u) over its tangent directions."""
    gauge: Gauge
    point: np.ndarray
    delta: float
    axis: np.ndarray            # e_n = point / |point|
    frame: np.ndarray           # n x (n-1), orthonormal, ⟂ axis
    gamma0: float
    grad_gamma0: np.ndarray

    @property
    def n(self) -> int:
        return self.point.size

    def gamma(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        base = u @ self.frame.T
        g = self.gauge

        def f(v):
            return g(base + v[:, None] * self.axis) - 1.0

        def fprime(v):
            return g.jet(base + v[:, None] * self.axis)[1] @ self.axis

        return newton(f, np.full(len(u), self.gamma0), fprime=fprime, tol=1e-15, maxiter=100)

    def Gamma(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return self.gamma(u) - self.gamma0 - u @ self.grad_gamma0

    def G(self, delta: float | None = None) -> float:
        """sup over the unit cap of |Γ(δ̲ u)| (attained on the boundary by convexity)."""
        d = self.delta if delta is None else delta
        dirs = _sphere_directions(self.n - 1) * anisotropic_dilation(d, self.n)
        return float(np.max(np.abs(self.Gamma(dirs))))

    def norm_factor(self, p: float) -> float:
        """(δ^{(3n-4)/2} G(δ̲))^{1/p'}."""
        return (self.delta ** ((3 * self.n - 4) / 2) * self.G()) ** (1.0 - 1.0 / p)

    def scaling_gap(self) -> float:
        """log δ^{(3n-4)/2} - ((n-1)/2) log G(δ̲); bounded above when the restriction estimate holds."""
        return (3 * self.n - 4) / 2 * math.log(self.delta) - (self.n - 1) / 2 * math.log(self.G())


def knapp_params(g: Gauge, point, delta: float) -> KnappParams:
    point = np.asarray(point, dtype=float)
    if not 0 < delta < 1:
        raise FamilyError(f"delta must lie in (0, 1), got {delta}")
    axis = point / np.linalg.norm(point)
    n = point.size
    if n == 2:
        frame = np.array([[-axis[1]], [axis[0]]])
    else:
        q, _ = np.linalg.qr(np.column_stack((axis, np.eye(n))))
        frame = q[:, 1:n]
    _, grad, _ = g.jet(point)
    grad_gamma0 = -(frame.T @ grad) / float(grad @ axis)
    return KnappParams(g, point, delta, axis, frame, float(np.linalg.norm(point)), grad_gamma0)


@dataclass(frozen=True)
class KnappCap(SeparableTestFamily):
    delta: float = 0.0
    G: float = 0.0
    theta0: float = 0.0
    e1: tuple[float, float] = (1.0, 0.0)

    @property
    def compact_support(self) -> bool:
        return self.profiles[0].is_compact

    def angular_support(self, g: Gauge, t: float) -> tuple[float, float]:
        """Angles where g1(t P(θ)·e1 / δ) is not negligible; the whole circle near the apex."""
        g1 = self.profiles[0]
        reach = (g1.half_support * g1.width + abs(g1.center)) * self.delta / t
        lo, hi = _angular_window(g, self.theta0, np.asarray(self.e1), reach)
        if min(hi - self.theta0, self.theta0 - lo) >= 0.5 * np.pi * (1.0 - 1e-12):
            return self.theta0 - np.pi, self.theta0 + np.pi
        return lo, hi


def default_profiles(kind: str = "gaussian") -> tuple[Profile, Profile, Profile]:
    return Profile(kind), Profile(kind), Profile(kind, 1.5, 1.0 if kind == "gaussian" else 0.5)


def _angular_window(g: Gauge, theta0: float, e1: np.ndarray, reach: float) -> tuple[float, float]:
    def side(sign: float) -> float:
        def f(th):
            return sign * float(sigma_point(g, np.array([th])).point[0] @ e1) - reach
        end = theta0 + sign * 0.5 * np.pi
        if f(end) <= 0:
            return end
        return brentq(f, *sorted((theta0, end)), xtol=1e-14)
    return side(-1.0), side(1.0)


def knapp_cap(g: Gauge, theta0: float, delta: float,
              profiles: tuple[Profile, Profile, Profile] | None = None) -> KnappCap:
    """F̂(ξ, η) = g1(ξ·e1/δ) g2((ξ·e2 - γ(0)η - γ'(0) ξ·e1)/G(δ)) g3(η) at the cap around θ0."""
    if g.dimension != 2:
        raise GaugeError("cone Knapp caps are built over planar curves")
    if not 0 < delta <= 0.25:
        raise FamilyError(f"delta must lie in (0, 1/4], got {delta}")
    profiles = profiles or default_profiles()
    point = sigma_point(g, np.array([theta0])).point[0]
    kp = knapp_params(g, point, delta)
    e2, e1 = kp.axis, kp.frame[:, 0]
    G = kp.G()
    gamma1 = float(kp.grad_gamma0[0])
    shear = ((e1[0], e1[1], 0.0),
             (e2[0] - gamma1 * e1[0], e2[1] - gamma1 * e1[1], -kp.gamma0),
             (0.0, 0.0, 1.0))
    g1 = profiles[0]
    reach = WINDOW_CUTOFF * (g1.half_support * g1.width + abs(g1.center)) * delta
    window = _angular_window(g, theta0, e1, reach)
    return KnappCap(tuple(profiles), (1.0 / delta, 1.0 / G, 1.0), shear, window,
                    delta=delta, G=G, theta0=theta0, e1=(float(e1[0]), float(e1[1])))


def _check_grid(deltas: Sequence[float]) -> np.ndarray:
    d = np.sort(np.asarray(deltas, dtype=float))[::-1]
    if d.size < 5:
        raise FamilyError("Knapp scans need at least 5 values of delta")
    if d.min() < 2.0 ** -9 * (1 - 1e-12) or d.max() > 2.0 ** -3 * (1 + 1e-12):
        raise FamilyError("delta grid must lie in [2^-9, 2^-3]")
    ratios = d[1:] / d[:-1]
    if np.ptp(ratios) > 1e-9:
        raise FamilyError("delta grid must be geometric")
    return d


def contact_order_estimate(g: Gauge, theta0: float, deltas: Sequence[float]) -> float:
    """Slope of log G(δ) against log δ at the cap point."""
    point = sigma_point(g, np.array([theta0])).point[0]
    d = np.asarray(deltas, dtype=float)
    Gs = np.array([knapp_params(g, point, x).G() for x in d])
    # heights below the floor are lost against γ(0) ~ 1 in double precision
    ok = Gs > HEIGHT_FLOOR
    if ok.sum() < 2:
        raise FamilyError(f"cap heights below {HEIGHT_FLOOR:g} at every δ; use larger δ")
    if not ok.all():
        logger.info("contact order: %d of %d deltas above the height floor", int(ok.sum()), d.size)
    return float(np.polyfit(np.log(d[ok]), np.log(Gs[ok]), 1)[0])


def _knapp_ratio(task) -> tuple[float, float, bool]:
    spec, theta0, delta, p, q, kind, tol = task
    g = make_gauge(spec)
    cap = knapp_cap(g, theta0, delta, default_profiles(kind))
    res = family_ratio(g, cap, p, q, WeightedConeMeasure.unweighted(g), tol=tol)
    return delta, res.ratio, res.converged


def knapp_scan(g: Gauge, p: float, q: float, deltas: Sequence[float] = DEFAULT_DELTAS,
               theta0: float = 0.0, profile: str = "gaussian", tol: float = 1e-8,
               workers: int = 1) -> ScanReport:
    """Log-log slope of the Knapp ratio against δ, compared with 1/q - (k+1)/p'."""
    d = _check_grid(deltas)
    k_fit = contact_order_estimate(g, theta0, d)
    k = int(round(k_fit))
    predicted = ExponentPair(p, q, k).knapp_slope()

    tasks = [(g.spec.to_dict(), theta0, float(delta), p, q, profile, tol) for delta in d]
    report = ScanReport("knapp-scan", ["delta", "ratio", "log_ratio"])
    valid_x, valid_y = [], []
    for delta, ratio, converged in parallel_map(_knapp_ratio, tasks, workers):
        log_ratio = math.log(ratio) if ratio > 0 else float("-inf")
        report.add(delta, ratio, log_ratio)
        if converged and ratio > 0:
            valid_x.append(math.log(delta))
            valid_y.append(log_ratio)
        else:
            logger.warning("knapp-scan: delta = %.6g excluded (converged=%s)", delta, converged)
    if len(valid_x) < 4:
        report.flag_unconverged(False)
        report.extras.update(k_estimate=k_fit, predicted_slope=predicted, slope=float("nan"))
        return report
    slope = float(np.polyfit(valid_x, valid_y, 1)[0])
    residual = abs(slope - predicted)
    report.check(residual <= SLOPE_TOLERANCE, residual)
    report.extras.update(k_estimate=k_fit, k=k, p=p, q=q, slope=slope,
                         predicted_slope=predicted, valid_rows=len(valid_x))
    logger.info("knapp-scan %s: slope %.4f, predicted %.4f (k = %d)", g.spec.name, slope, predicted, k)
    return report


def critical_q_scan(g: Gauge, p: float, q_grid: Sequence[float], theta0: float = 0.0,
                    deltas: Sequence[float] = DEFAULT_DELTAS, tol: float = 1e-8,
                    workers: int = 1) -> ScanReport:
    """Slope against q; the zero crossing estimates the critical exponent p'/(k+1)."""
    report = ScanReport("critical-q", ["q", "slope", "predicted_slope"])
    slopes = []
    k = None
    for q in q_grid:
        scan = knapp_scan(g, p, q, deltas, theta0, tol=tol, workers=workers)
        report.flag_unconverged(not scan.unconverged)
        k = scan.extras.get("k", k)
        slopes.append(scan.extras["slope"])
        report.add(float(q), scan.extras["slope"], scan.extras["predicted_slope"])
    qs = np.asarray(q_grid, dtype=float)
    s = np.asarray(slopes)
    crossing = float("nan")
    for i in range(len(qs) - 1):
        if np.isfinite(s[i]) and np.isfinite(s[i + 1]) and s[i] * s[i + 1] <= 0 and s[i] != s[i + 1]:
            crossing = float(qs[i] - s[i] * (qs[i + 1] - qs[i]) / (s[i + 1] - s[i]))
            break
    if k is None:
        report.check(False)
        return report
    expected = float(_conj(p) / (k + 1))
    residual = abs(crossing - expected) / expected if math.isfinite(crossing) else float("inf")
    report.check(residual <= 0.05, residual)
    report.extras.update(critical_q=crossing, predicted_critical_q=expected, k=k)
    return report


# 直接运行脚本：举个示例
if __name__ == "__main__":
    sub = subcritical_exponents(Fraction(6, 5), Fraction(3, 2), 3)
    print(f"[EXPONENTS] k=3, p=6/5: ρ = {sub.rho}, τ = {sub.tau}, identities hold: {sub.holds}")
    g = make_gauge("circle")
    params = knapp_params(g, sigma_point(g, np.array([0.0])).point[0], 1 / 8)
    print(f"[KNAPP] circle δ = 1/8: G(δ)/δ² = {params.G() * 64:.6f} (→ 1/2)")
