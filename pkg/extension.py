# extension.py
"""Weighted cone extension operator (direct and sliced) and restriction ratios
for separable test families."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from measure import WeightedConeMeasure, angular_breaks, cone_norm, slice_rule
from utils.gauge import Gauge, sigma_point
from utils.quadrature import (DEFAULT_ORDER, QuadratureResult, all_converged, composite_gauss_legendre,
                              cusp_composite_rule, merge_breaks, ordered_sum, panels_for_oscillation,
                              refine, uniform_breaks)
from weight import weight

logger = logging.getLogger(__name__)

OSCILLATION_BUDGET = 1e3
DENSITY_KINDS = ("exponential", "gaussian", "zero")
PROFILE_KINDS = ("gaussian", "bump", "zero")


class OscillationBudgetError(ValueError):
    """(x, t) too large for brute-force oscillatory quadrature."""


class FamilyError(ValueError):
    """Test family (or its parameters) outside the admissible range."""


# ---------- densities on the cone ----------

@dataclass(frozen=True)
class ConeDensity:
    """u(ξ, t) = radial(λ t) · (1 + a cos arg ξ) with an explicit decay envelope.

    ``scale`` is the rate of the exponential profile e^{-scale s} or the width
    of the Gaussian profile e^{-π (s/scale)^2}; ``dilation`` is λ.
    """
    kind: str = "exponential"
    scale: float = 2.0 * np.pi
    angular: float = 0.0
    dilation: float = 1.0

    def __post_init__(self):
        if self.kind not in DENSITY_KINDS:
            raise FamilyError(f"unknown density kind '{self.kind}'")
        if self.scale <= 0 or self.dilation <= 0:
            raise FamilyError("density scale and dilation must be positive")

    def _radial(self, s):
        if self.kind == "exponential":
            return np.exp(-self.scale * s)
        if self.kind == "gaussian":
            return np.exp(-np.pi * (s / self.scale) ** 2)
        return np.zeros_like(s)

    def __call__(self, xi, t):
        xi = np.asarray(xi, dtype=float)
        radial = self._radial(self.dilation * np.asarray(t, dtype=float))
        if self.angular == 0.0:
            return radial
        return radial * (1.0 + self.angular * np.cos(np.arctan2(xi[..., 1], xi[..., 0])))

    def envelope(self, t: float) -> float:
        return float((1.0 + abs(self.angular)) * self._radial(np.asarray(self.dilation * t)))

    @property
    def decay_length(self) -> float:
        if self.kind == "gaussian":
            return self.scale / self.dilation
        return 1.0 / (self.scale * self.dilation)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def rescaled(self, lam: float) -> "ConeDensity":
        """u(ξ, t) -> u(λξ, λt)."""
        return replace(self, dilation=self.dilation * lam)


def _check_budget(x: np.ndarray, t: float) -> None:
    if np.linalg.norm(x) > OSCILLATION_BUDGET or abs(t) > OSCILLATION_BUDGET:
        raise OscillationBudgetError(f"|x| = {np.linalg.norm(x):.3g}, |t| = {abs(t):.3g} "
                                     f"exceed the budget {OSCILLATION_BUDGET:g}")


def _angular_panels(rho_max: float, x: np.ndarray, t: float, speed: float) -> int:
    # d/dθ of ρ(x·u + t ψ) is bounded by ρ_max (|x| + |t| max|ψ'|)
    return panels_for_oscillation(2.0 * np.pi, rho_max * (np.linalg.norm(x) + abs(t) * speed),
                                  minimum=8)


# ---------- extension operator ----------

def extension_eval(g: Gauge, u: ConeDensity, x, t: float, mu: WeightedConeMeasure,
                   tol: float = 1e-8) -> QuadratureResult:
    """(u dμ)ˇ(x, t) by Euclidean polar quadrature ξ = ρ(cos θ, sin θ)."""
    x = np.asarray(x, dtype=float)
    t = float(t)
    _check_budget(x, t)
    if getattr(u, "is_zero", False):
        return QuadratureResult(0j, 0.0, True)
    lo, hi = mu.t_range(u, 1.0, tol)
    full = mu.support == "full"

    probe = sigma_point(g, np.linspace(0.0, 2.0 * np.pi, 1024, endpoint=False))
    r_max = float(probe.radius.max())
    speed = float(np.max(np.abs(probe.radius_prime) / probe.radius ** 2))   # max |ψ'|
    decay = max(getattr(u, "decay_length", 2.0), 0.25)

    def evaluate(level: int):
        panels = _angular_panels(hi * r_max, x, t, speed)
        theta, wa = composite_gauss_legendre(angular_breaks(g, panels), DEFAULT_ORDER * level)
        cs = np.stack((np.cos(theta), np.sin(theta)), axis=-1)
        psi, grad, _ = g.jet(cs)
        w = np.clip(weight(g, cs, mu.conv), 0.0, None)
        ang = w ** mu.exponent if mu.exponent > 0 else np.ones_like(w)
        if mu.support == "surface":
            ang = ang * np.sqrt(1.0 + np.sum(grad * grad, axis=-1))
        freq = np.abs(cs @ x) + abs(t) * psi                       # cycles per unit ρ
        if full:
            rho_hi = hi * r_max
            n_pan = max(panels_for_oscillation(rho_hi, float(freq.max())),
                        math.ceil(hi / decay))
            rho, wr = composite_gauss_legendre(uniform_breaks(0.0, rho_hi, n_pan), DEFAULT_ORDER * level)
            rho = np.broadcast_to(rho, (theta.size, rho.size))
            wr = np.broadcast_to(wr, rho.shape)
            radial_factor = 1.0 / psi[:, None]                     # ρ dρ / φ(ρu)
        else:
            a, b = lo / psi, hi / psi                              # ρ-limits of 1 <= φ <= 2
            n_pan = max(panels_for_oscillation(float(np.max(b - a)), float(freq.max())),
                        math.ceil((hi - lo) / decay))
            ref, wref = composite_gauss_legendre(uniform_breaks(0.0, 1.0, n_pan), DEFAULT_ORDER * level)
            rho = a[:, None] + (b - a)[:, None] * ref[None, :]
            wr = (b - a)[:, None] * wref[None, :]
            radial_factor = rho
        xi = rho[..., None] * cs[:, None, :]
        tt = rho * psi[:, None]
        phase = 2.0 * np.pi * (rho * (cs @ x)[:, None] + t * tt)
        vals = np.exp(1j * phase) * u(xi, tt) * radial_factor * ang[:, None]
        return ordered_sum(wa[:, None] * wr * vals)

    return refine(evaluate, 1, tol, "extension_eval")


def extension_eval_sliced(g: Gauge, u: ConeDensity, x, t: float, mu: WeightedConeMeasure,
                          tol: float = 1e-8) -> QuadratureResult:
    """Same value as an s-integral of curve integrals over Σ weighted by κ^e."""
    x = np.asarray(x, dtype=float)
    t = float(t)
    _check_budget(x, t)
    if getattr(u, "is_zero", False):
        return QuadratureResult(0j, 0.0, True)
    lo, hi = mu.t_range(u, 1.0, tol)
    power = 0 if mu.support == "full" else 1
    e = mu.exponent

    probe = sigma_point(g, np.linspace(0.0, 2.0 * np.pi, 1024, endpoint=False))
    r_max = float(probe.radius.max())
    decay = max(getattr(u, "decay_length", 2.0), 0.25)

    def evaluate(level: int):
        n_s = max(panels_for_oscillation(hi - lo, abs(t) + np.linalg.norm(x) * r_max),
                  math.ceil((hi - lo) / decay))
        s, ws = composite_gauss_legendre(uniform_breaks(lo, hi, n_s), DEFAULT_ORDER * level)
        panels = panels_for_oscillation(2.0 * np.pi, hi * r_max * np.linalg.norm(x), minimum=8)
        rule = slice_rule(g, DEFAULT_ORDER * level, conv=mu.conv, panels=panels)
        sample = rule.sample
        kappa = np.clip(sample.curvature, 0.0, None)
        ang = (kappa ** e if e > 0 else np.ones_like(kappa)) * rule.grad_norm ** (3 * e - 1) \
            * sample.arc_element
        if mu.support == "surface":
            ang = ang * np.sqrt(1.0 + rule.grad_norm ** 2)
        xi = s[:, None, None] * sample.point[None, :, :]
        tt = np.broadcast_to(s[:, None], xi.shape[:2])
        phase = 2.0 * np.pi * s[:, None] * (t + (sample.point @ x)[None, :])
        vals = np.exp(1j * phase) * u(xi, tt) * ang[None, :] * (s ** power)[:, None]
        return ordered_sum(ws[:, None] * vals * rule.weights[None, :])

    return refine(evaluate, 1, tol, "extension_eval_sliced")


# ---------- separable test families ----------

@lru_cache(maxsize=None)
def _base_dual_norm(kind: str, p: float) -> QuadratureResult:
    if kind == "gaussian":
        # e^{-π x^2} is its own inverse transform
        value = 1.0 if math.isinf(p) else p ** (-1.0 / (2.0 * p))
        return QuadratureResult(value, 0.0, True)
    if kind == "zero":
        return QuadratureResult(0.0, 0.0, True)
    profile = Profile(kind)
    return dual_lp_norm(profile, profile.half_support, p, profile.dual_reach)


@dataclass(frozen=True)
class Profile:
    """1D frequency profile g((x - center)/width); bump is e^{1 - 1/(1 - y^2)} (peak 1)."""
    kind: str = "gaussian"
    center: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise FamilyError(f"unknown profile kind '{self.kind}'")
        if self.width <= 0:
            raise FamilyError("profile width must be positive")

    def __call__(self, x):
        y = (np.asarray(x, dtype=float) - self.center) / self.width
        if self.kind == "gaussian":
            return np.exp(-np.pi * y * y)
        if self.kind == "bump":
            inside = np.abs(y) < 1.0
            safe = np.where(inside, y, 0.0)
            return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe * safe)), 0.0)
        return np.zeros_like(y)

    @property
    def is_compact(self) -> bool:
        return self.kind == "bump"

    @property
    def half_support(self) -> float:
        """Half-width (in units of ``width``) outside which the profile is below 1e-16."""
        return 6.0 if self.kind == "gaussian" else 1.0

    @property
    def dual_reach(self) -> float:
        """|x| beyond which the unit-width inverse transform is negligible."""
        return 6.0 if self.kind == "gaussian" else 120.0

    def dual_norm(self, p: float) -> float:
        """‖ǧ‖_p; a width-w profile scales as w^{1/p'}."""
        base = float(_base_dual_norm(self.kind, float(p)).value)
        return base * self.width ** (1.0 - 1.0 / p)


def _transform_zeros(signed: Callable[[np.ndarray], np.ndarray], x_max: float,
                     spacing: float) -> list[float]:
    """Sign changes of a real transform on [-x_max, x_max], refined by brentq.

    Crossings where the transform is at rounding level are skipped.
    """
    grid = np.linspace(-x_max, x_max, int(math.ceil(2.0 * x_max / spacing)) + 1)
    vals = signed(grid)
    floor = 1e-10 * float(np.max(np.abs(vals)))
    flips = np.nonzero((vals[:-1] * vals[1:] < 0)
                       & (np.maximum(np.abs(vals[:-1]), np.abs(vals[1:])) > floor))[0]
    return [brentq(lambda s: float(signed(np.array([s]))[0]), grid[i], grid[i + 1], xtol=1e-14)
            for i in flips]


def dual_lp_norm(func, half_width: float, p: float, x_max: float,
                 center: float = 0.0, tol: float = 1e-6) -> QuadratureResult:
    """‖ǧ‖_{L^p(R)} for g supported (numerically) in center ± half_width.

    ǧ is evaluated by Gauss–Legendre on the support, then |ǧ|^p is integrated
    over [-x_max, x_max]; the tail beyond x_max is bounded by the edge value.
    When g is symmetric about its center, ǧ e^{-2πi x center} is real and
    its zeros become anchored panel ends, where |ǧ|^p has a cusp.
    """
    width = 2.0 * half_width
    xi, wxi = composite_gauss_legendre(
        uniform_breaks(center - half_width, center + half_width,
                       panels_for_oscillation(width, x_max, minimum=4)))
    shifted = xi - center
    gx = func(xi) * wxi

    def recentered(x):
        out = np.empty(x.size, dtype=complex)
        for start in range(0, x.size, 1024):
            chunk = x[start:start + 1024]
            out[start:start + 1024] = np.exp(2j * np.pi * chunk[:, None] * shifted[None, :]) @ gx
        return out

    def transform(x):
        return np.abs(recentered(x))

    panels = panels_for_oscillation(2.0 * x_max, half_width, minimum=32)
    breaks = uniform_breaks(-x_max, x_max, panels)
    zeros: list[float] = []
    if not math.isinf(p):
        probe = recentered(np.linspace(-x_max, x_max, 257))
        if np.max(np.abs(probe.imag)) <= 1e-9 * np.max(np.abs(probe.real)):
            zeros = _transform_zeros(lambda x: recentered(x).real, x_max, 1.0 / (16.0 * half_width))
            breaks = merge_breaks(breaks, zeros, a=-x_max, b=x_max)

    def evaluate(level: int):
        if math.isinf(p):
            x, _ = composite_gauss_legendre(breaks, DEFAULT_ORDER * level)
            return float(transform(np.concatenate((x, breaks, [0.0]))).max())
        x, wx, anchor = cusp_composite_rule(breaks, zeros, p, DEFAULT_ORDER * level)
        return float(ordered_sum(wx * transform(x) ** p / anchor)) ** (1.0 / p)

    result = refine(evaluate, 1, tol, "dual_lp_norm")
    if not math.isinf(p):
        edge = float(transform(np.array([x_max]))[0])
        if edge ** p * x_max > tol * result.value ** p:
            logger.warning("dual_lp_norm tail not negligible: |ǧ(%.1f)| = %.3e", x_max, edge)
            result = QuadratureResult(result.value, result.error, False)
    return result


@dataclass(frozen=True)
class SeparableTestFamily:
    """F̂(ζ) = Π_i g_i(d_i (Uζ)_i) for ζ = (ξ, η), U unimodular, d_i > 0."""
    profiles: tuple[Profile, ...]
    scales: tuple[float, ...] = (1.0, 1.0, 1.0)
    shear: tuple[tuple[float, ...], ...] = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    angular_window: tuple[float, float] | None = None

    def __post_init__(self):
        U = np.asarray(self.shear, dtype=float)
        m = len(self.profiles)
        if U.shape != (m, m) or len(self.scales) != m:
            raise FamilyError("profiles, scales and shear disagree in size")
        if abs(abs(np.linalg.det(U)) - 1.0) > 1e-9:
            raise FamilyError(f"non-factorizable family: |det U| = {abs(np.linalg.det(U)):.6g} != 1")
        if any(d <= 0 for d in self.scales):
            raise FamilyError("family scales must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.scales) @ np.asarray(self.shear, dtype=float)

    @property
    def is_zero(self) -> bool:
        return any(pr.kind == "zero" for pr in self.profiles)

    @property
    def height_factor(self) -> tuple[Profile, float] | None:
        """(g, a) when the last factor reads the height alone, as g(a η); None otherwise."""
        M = self.matrix
        if np.any(M[-1, :-1] != 0.0) or M[-1, -1] == 0.0:
            return None
        return self.profiles[-1], float(M[-1, -1])

    def envelope(self, t: float) -> float:
        """sup of |F̂| over heights >= t; every profile peaks at 1."""
        factor = self.height_factor
        if factor is None:
            raise FamilyError("the height enters more than one factor; no envelope in η")
        pr, a = factor
        y = (abs(a) * float(t) - math.copysign(pr.center, a)) / pr.width
        if y <= 0.0:
            return 0.0 if pr.kind == "zero" else 1.0
        return float(Profile(pr.kind)(np.asarray(y)))

    @property
    def decay_length(self) -> float:
        factor = self.height_factor
        if factor is None:
            return 2.0
        pr, a = factor
        return pr.width / abs(a)

    def fhat(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        zeta = np.concatenate((xi, np.asarray(eta, dtype=float)[..., None]), axis=-1)
        args = zeta @ self.matrix.T
        out = np.ones(args.shape[:-1])
        for i, pr in enumerate(self.profiles):
            out = out * pr(args[..., i])
        return out

    def __call__(self, xi, t):
        return self.fhat(xi, t)

    def lp_norm(self, p: float) -> float:
        """‖F‖_p = |det M|^{-1/p'} Π ‖ǧ_i‖_p with M = diag(d) U."""
        inv_conj = 1.0 - 1.0 / p
        return float(np.prod([pr.dual_norm(p) * d ** (-inv_conj)
                              for pr, d in zip(self.profiles, self.scales)]))

    def quadrature_lp_norm(self, p: float) -> QuadratureResult:
        """Same norm with every dilated 1D profile transformed numerically."""
        value, err, ok = 1.0, 0.0, True
        for pr, d in zip(self.profiles, self.scales):
            if pr.kind == "zero":
                return QuadratureResult(0.0, 0.0, True)
            # s -> g(d s) has width w/d, so its transform lives on |x| <= reach * d / w
            res = dual_lp_norm(lambda s, pr=pr, d=d: pr(d * s), pr.half_support * pr.width / d, p,
                               pr.dual_reach * d / pr.width, center=pr.center / d)
            value *= float(res.value)
            err += float(res.error)
            ok = ok and res.converged
        return QuadratureResult(value, err, ok)


def gaussian_family(centers=(0.0, 0.0, 1.5), widths=(1.0, 1.0, 0.5)) -> SeparableTestFamily:
    return SeparableTestFamily(tuple(Profile("gaussian", c, w) for c, w in zip(centers, widths)))


@dataclass(frozen=True)
class RatioResult:
    ratio: float
    numerator: float
    denominator: float
    converged: bool


def family_ratio(g: Gauge, fam: SeparableTestFamily, p: float, q: float,
                 mu: WeightedConeMeasure, tol: float = 1e-8,
                 scheme: tuple[int, int] = (16, 128)) -> RatioResult:
    """‖F̂|_cone‖_{L^q(μ)} / ‖F‖_{L^p(R^3)}; a lower bound for the restriction constant."""
    if not (1 <= p <= math.inf and 1 <= q <= math.inf):
        raise FamilyError(f"exponents out of range: p = {p}, q = {q}")
    if fam.is_zero:
        return RatioResult(0.0, 0.0, 1.0, True)
    if mu.support == "full" and mu.t_max is None and fam.height_factor is None:
        raise FamilyError("full-cone ratios need a family whose last factor depends on η alone "
                          "(or a measure with t_max)")
    num = cone_norm(fam, mu, q, window=fam.angular_window, scheme=scheme, tol=tol)
    den = fam.lp_norm(p)
    ok = num.converged and all_converged(_base_dual_norm(pr.kind, float(p)) for pr in fam.profiles)
    return RatioResult(float(num.value) / den, float(num.value), den, ok)


# 直接运行脚本：举个示例
if __name__ == "__main__":
    from utils.gauge import make_gauge
    g = make_gauge("circle")
    res = extension_eval(g, ConeDensity(), np.zeros(2), 1.0, WeightedConeMeasure(g))
    print(f"[EXTENSION] (u dμ)ˇ(0, 1) = {complex(res.value):.10f} (exact 0.5+0.5j), converged {res.converged}")
