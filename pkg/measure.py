# measure.py
"""Plane / co-area quadrature, weighted cone measures, Lorentz norms and
dyadic sublevel sets of the affine weight.

Points of the plane are written ξ = t·P(θ) with P(θ) ∈ Σ, so that
dξ = t·R(θ)^2 dt dθ and, slice by slice, dσ_t/|∇φ| = t·|P'(θ)|/|∇φ(P)| dθ.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from utils.gauge import Gauge, GaugeError, SigmaSample, sigma_point
from utils.quadrature import (DEFAULT_ORDER, QuadratureResult, certify, composite_gauss_legendre,
                              graded_breaks, merge_breaks, ordered_sum, refine, uniform_breaks)
from weight import DEFAULT_CONVENTION, WeightConvention, weight

logger = logging.getLogger(__name__)

SUPPORTS = ("full", "compact", "surface")
MIN_NODES = 16
ANGULAR_PANELS = 8
TAIL_FRACTION = 1e-3
WEIGHT_FLOOR = -1e-10
BIN_SLACK = 1e-12          # w = 2^j up to rounding lands in Σ_j


class MeasureError(ValueError):
    """Invalid measure, exponent or sample set."""


# ---------- angular rules ----------

def angular_breaks(g: Gauge, panels: int = ANGULAR_PANELS,
                   window: tuple[float, float] | None = None,
                   graded_ends: bool = False) -> np.ndarray:
    """Panel breaks on [a, b], graded towards the flat directions of Σ (and the window ends)."""
    a, b = window if window is not None else (0.0, 2.0 * np.pi)
    if not b > a:
        raise MeasureError(f"empty angular window ({a}, {b})")
    reach = min(0.25, 0.5 * (b - a) / panels)
    extra = []
    for theta in g.flat_directions():
        for shift in (-2.0 * np.pi, 0.0, 2.0 * np.pi):
            centre = theta + shift
            if a - reach < centre < b + reach:
                extra.append(graded_breaks(centre, reach))
    if graded_ends:
        extra.extend(graded_breaks(end, 0.125 * (b - a), levels=6) for end in (a, b))
    return merge_breaks(uniform_breaks(a, b, panels), *extra, a=a, b=b)


@dataclass(frozen=True)
class SliceRule:
    """Quadrature nodes along Σ with everything a slice integral needs."""
    theta: np.ndarray
    weights: np.ndarray
    sample: SigmaSample
    grad_norm: np.ndarray
    weight: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return self.sample.point


def slice_rule(g: Gauge, order: int = DEFAULT_ORDER,
               window: tuple[float, float] | None = None,
               conv: WeightConvention = DEFAULT_CONVENTION,
               panels: int = ANGULAR_PANELS, graded_ends: bool = False) -> SliceRule:
    theta, wts = composite_gauss_legendre(angular_breaks(g, panels, window, graded_ends), order)
    sample = sigma_point(g, theta)
    _, grad, _ = g.jet(sample.point)
    w = weight(g, sample.point, conv)
    return SliceRule(theta, wts, sample, np.linalg.norm(grad, axis=-1), w)


def _radial_rule(t_range: tuple[float, float], order: int, panel_length: float = 2.0,
                 extra=()) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = map(float, t_range)
    if not hi > lo >= 0.0:
        raise MeasureError(f"invalid t-range {t_range}")
    panels = max(1, math.ceil((hi - lo) / panel_length))
    breaks = merge_breaks(uniform_breaks(lo, hi, panels), *extra, a=lo, b=hi)
    return composite_gauss_legendre(breaks, order)


def _height_breaks(u, lo: float, hi: float) -> list[np.ndarray]:
    """Graded breaks at the support edges of a compact height profile g(a η)."""
    factor = getattr(u, "height_factor", None)
    if factor is None or not factor[0].is_compact:
        return []
    pr, a = factor
    reach = 0.125 * (hi - lo)
    edges = ((pr.center - pr.width) / a, (pr.center + pr.width) / a)
    return [graded_breaks(e, reach, levels=6) for e in edges if lo - reach < e < hi + reach]


def _check_scheme(scheme: tuple[int, int]) -> tuple[int, int]:
    nr, na = map(int, scheme)
    if nr < MIN_NODES or na < MIN_NODES:
        raise MeasureError(f"quadrature scheme {scheme} below {MIN_NODES} nodes per direction")
    return nr, na


# ---------- plane and co-area integrals ----------

def plane_integral(f: Callable[[np.ndarray], np.ndarray], g: Gauge,
                   t_range: tuple[float, float], scheme: tuple[int, int] = (16, 128),
                   tol: float = 1e-10) -> QuadratureResult:
    """∫ f dξ over {t0 <= φ <= t1}, tensor Gauss–Legendre in (t, θ) with dξ = t R^2 dt dθ."""
    nr, na = _check_scheme(scheme)

    def evaluate(level: int):
        t, wt = _radial_rule(t_range, nr * level)
        theta, wa = composite_gauss_legendre(angular_breaks(g), max(2, na * level // ANGULAR_PANELS))
        sample = sigma_point(g, theta)
        pts = t[:, None, None] * sample.point[None, :, :]
        vals = f(pts) * t[:, None] * (sample.radius ** 2)[None, :]
        return ordered_sum(wt[:, None] * vals * wa[None, :])

    return refine(evaluate, 1, tol, "plane_integral")


def coarea_integral(f: Callable[[np.ndarray], np.ndarray], g: Gauge,
                    t_range: tuple[float, float], scheme: tuple[int, int] = (16, 128),
                    tol: float = 1e-10) -> QuadratureResult:
    """∫ dt ∫_{Σ_t} f dσ_t / |∇φ|, each level set Σ_t = t·Σ parametrised by θ."""
    nr, na = _check_scheme(scheme)

    def evaluate(level: int):
        t, wt = _radial_rule(t_range, nr * level)
        rule = slice_rule(g, max(2, na * level // ANGULAR_PANELS))
        pts = t[:, None, None] * rule.points[None, :, :]
        density = rule.sample.arc_element / rule.grad_norm
        vals = f(pts) * t[:, None] * density[None, :]
        return ordered_sum(wt[:, None] * vals * rule.weights[None, :])

    return refine(evaluate, 1, tol, "coarea_integral")


# ---------- weighted cone measure ----------

@dataclass(frozen=True)
class WeightedConeMeasure:
    """w^e dξ/φ on the full cone, w^e dξ on Δ = {1 <= φ <= 2}, or surface measure on Δ."""
    gauge: Gauge
    exponent: float = 1.0 / 3.0
    support: str = "full"
    t_max: float | None = None
    conv: WeightConvention = DEFAULT_CONVENTION

    def __post_init__(self):
        if self.support not in SUPPORTS:
            raise MeasureError(f"unknown support '{self.support}', expected one of {SUPPORTS}")
        if self.exponent < 0:
            raise MeasureError(f"weight exponent must be >= 0, got {self.exponent}")
        if self.t_max is not None and self.t_max <= 0:
            raise MeasureError(f"t_max must be positive, got {self.t_max}")

    @classmethod
    def corollary(cls, g: Gauge) -> "WeightedConeMeasure":
        """w^{1/(n+1)} dξ on Δ."""
        return cls(g, 1.0 / (g.dimension + 1), "compact")

    @classmethod
    def unweighted(cls, g: Gauge) -> "WeightedConeMeasure":
        return cls(g, 0.0, "compact")

    @property
    def radial_power(self) -> int:
        # dξ/φ = R^2 dt dθ drops the factor t that dξ carries
        return 0 if self.support == "full" else 1

    def density(self, rule: SliceRule) -> np.ndarray:
        """Angular density so that dμ = density(θ) · t^radial_power dt dθ."""
        w = rule.weight
        if self.exponent > 0:
            if np.min(w) < WEIGHT_FLOOR:
                raise MeasureError(f"negative affine weight {np.min(w):.3e}; "
                                   f"convention {self.conv.value} or non-convex gauge")
            w = np.clip(w, 0.0, None) ** self.exponent
        else:
            w = np.ones_like(w)
        base = w * rule.sample.arc_element / rule.grad_norm
        if self.support == "surface":
            base = base * np.sqrt(1.0 + rule.grad_norm ** 2)
        return base

    def slice_mass(self, order: int = DEFAULT_ORDER) -> float:
        rule = slice_rule(self.gauge, order, conv=self.conv)
        return float(ordered_sum(self.density(rule) * rule.weights))

    def t_range(self, u=None, q: float = 1.0, tol: float = 1e-8) -> tuple[float, float]:
        if self.support != "full":
            return 1.0, 2.0
        if self.t_max is not None:
            return 0.0, float(self.t_max)
        return 0.0, truncation_height(u, self, q, tol)


def truncation_height(u, mu: WeightedConeMeasure, q: float = 1.0, tol: float = 1e-8) -> float:
    """Smallest T (on a decay-length grid) with slice_mass · env(T)^q · decay <= 1e-3 · tol."""
    envelope = getattr(u, "envelope", None)
    decay = getattr(u, "decay_length", None)
    if envelope is None or decay is None:
        raise MeasureError("full-cone integrals need a density with an explicit decay envelope "
                           "(or a measure with t_max)")
    mass = mu.slice_mass()
    target = TAIL_FRACTION * tol
    for i in range(1, 100_000):
        T = 0.25 * i * decay
        if mass * envelope(T) ** q * decay <= target:
            return T
    raise MeasureError("envelope does not decay fast enough to truncate the cone")


def cone_norm(u, mu: WeightedConeMeasure, q: float, *, window: tuple[float, float] | None = None,
              scheme: tuple[int, int] = (16, 128), tol: float = 1e-8) -> QuadratureResult:
    """(∫ |u|^q dμ)^{1/q}; u is called as u(ξ, t) with t = φ(ξ).

    When u provides ``angular_support(g, t)``, each height gets its own angular
    window; ``compact_support`` grades the panels towards the window ends.
    """
    if q < 1:
        raise MeasureError(f"cone norm needs q >= 1, got {q}")
    nr, na = _check_scheme(scheme)
    lo, hi = mu.t_range(u, 1.0 if math.isinf(q) else q, tol)
    panel = getattr(u, "decay_length", 2.0) if mu.support == "full" else 2.0
    support = getattr(u, "angular_support", None)
    graded = bool(getattr(u, "compact_support", False))
    panels = ANGULAR_PANELS if window is None and support is None else 3 * ANGULAR_PANELS
    heights = _height_breaks(u, lo, hi)

    def reduce(t, wt, rule: SliceRule) -> float:
        dens = mu.density(rule)
        pts = t[:, None, None] * rule.points[None, :, :]
        vals = np.abs(u(pts, np.broadcast_to(t[:, None], pts.shape[:2])))
        if math.isinf(q):
            return float(np.max(np.where(dens[None, :] > 0, vals, 0.0)))
        integrand = vals ** q * (t ** mu.radial_power)[:, None] * dens[None, :]
        return float(ordered_sum(wt[:, None] * integrand * rule.weights[None, :]))

    def evaluate(level: int):
        t, wt = _radial_rule((lo, hi), nr * level, max(panel, 0.25), heights)
        order = max(2, na * level // ANGULAR_PANELS)
        if support is None:
            return reduce(t, wt, slice_rule(mu.gauge, order, window, mu.conv, panels))
        rows = np.array([reduce(t[i:i + 1], wt[i:i + 1],
                                slice_rule(mu.gauge, order, support(mu.gauge, float(t[i])),
                                           mu.conv, panels, graded))
                         for i in range(t.size)])
        return float(rows.max()) if math.isinf(q) else float(ordered_sum(rows))

    coarse, fine = evaluate(1), evaluate(2)
    if math.isinf(q):
        return certify(coarse, fine, tol, "cone_norm")
    return certify(coarse ** (1.0 / q), fine ** (1.0 / q), tol, "cone_norm")


# ---------- Lorentz norms ----------

@dataclass(frozen=True)
class SampledFunction:
    """|f| on a discretised measure space: sample values with positive cell masses."""
    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = np.abs(np.asarray(self.values)).astype(float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if values.shape != weights.shape:
            raise MeasureError("values and measure weights differ in length")
        if weights.size and (np.any(weights <= 0) or not np.all(np.isfinite(weights))):
            raise MeasureError("measure weights must be positive and finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @property
    def total_measure(self) -> float:
        return float(np.sum(self.weights))


def lorentz_norm(f: SampledFunction, q: float, r: float) -> float:
    """‖f‖_{q,r} = (∫ (s^{1/q} f*(s))^r ds/s)^{1/r}; r = ∞ gives sup s^{1/q} f*(s).

    f* is a step function, so each step integrates in closed form:
    ∫_{s_{i-1}}^{s_i} s^{r/q - 1} ds = (q/r)(s_i^{r/q} - s_{i-1}^{r/q}).
    """
    if q < 1:
        raise MeasureError(f"Lorentz norm needs q >= 1, got {q}")
    if r < 1:
        raise MeasureError(f"Lorentz norm needs r >= 1, got {r}")
    if f.values.size == 0:
        return 0.0
    # descending values, ties broken by mass: a canonical order independent of input order
    order = np.lexsort((f.weights, -f.values))
    v = f.values[order]
    s = np.cumsum(f.weights[order])
    if math.isinf(r):
        return float(np.max(v * s ** (1.0 / q)))
    s_prev = np.concatenate(([0.0], s[:-1]))
    steps = (q / r) * (s ** (r / q) - s_prev ** (r / q))
    return float(ordered_sum(v ** r * steps) ** (1.0 / r))


def log_grid_samples(func: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                     points: int) -> SampledFunction:
    """Samples of func on (0, hi] for Lebesgue measure: geometric cells on [lo, hi]
    at their geometric midpoints, plus the origin cell [0, lo] carrying func(lo)."""
    if not 0 < lo < hi or points < 2:
        raise MeasureError("log grid needs 0 < lo < hi and at least two points")
    edges = np.geomspace(lo, hi, points)
    mids = np.sqrt(edges[:-1] * edges[1:])
    values = np.concatenate(([func(np.array([lo]))[0]], func(mids)))
    weights = np.concatenate(([lo], np.diff(edges)))
    return SampledFunction(values, weights)


# ---------- dyadic sublevel sets ----------

@dataclass
class SublevelHistogram:
    """Arclength of Σ_j = {2^j <= w < 2^{j+1}} on Σ and area of Δ_j on Δ."""
    bins: np.ndarray
    arclength: np.ndarray
    area: np.ndarray
    counts: np.ndarray
    zero_arclength: float
    zero_area: float
    total_arclength: float
    fit: dict = field(default_factory=dict)

    def arclength_of(self, j: int) -> float:
        hit = np.flatnonzero(self.bins == j)
        return float(self.arclength[hit[0]]) if hit.size else 0.0

    def rows(self) -> list[tuple[int, float, float]]:
        return [(int(j), float(a), float(d)) for j, a, d in zip(self.bins, self.arclength, self.area)]

    def completeness_residual(self) -> float:
        found = float(np.sum(self.arclength)) + self.zero_arclength
        return abs(found - self.total_arclength) / self.total_arclength

    def fit_slope(self, skip_top: int = 8, bins: int = 10, min_count: int = 256) -> float:
        """Slope of log2 σ(Σ_j) against j over the bins below the top ``skip_top``."""
        nonempty = self.counts > 0
        if not np.any(nonempty):
            return float("nan")
        top = int(np.max(self.bins[nonempty]))
        usable = nonempty & (self.counts >= min_count) & (self.bins <= top - skip_top)
        chosen = np.sort(self.bins[usable])[-bins:]
        self.fit = {"top_bin": top, "bins": chosen.tolist()}
        if chosen.size < 3:
            logger.warning("sublevel fit: only %d usable dyadic bins", chosen.size)
            return float("nan")
        sel = np.isin(self.bins, chosen)
        slope = np.polyfit(self.bins[sel].astype(float), np.log2(self.arclength[sel]), 1)[0]
        self.fit["slope"] = float(slope)
        return float(slope)


def sublevel_histogram(g: Gauge, conv: WeightConvention = DEFAULT_CONVENTION,
                       nodes: int = 2 ** 20, chunk: int = 2 ** 16) -> SublevelHistogram:
    if g.dimension != 2:
        raise GaugeError("sublevel sets are computed on planar curves")
    if nodes < 2 ** 16:
        raise MeasureError(f"sublevel sampling needs >= 2^16 nodes, got {nodes}")
    step = 2.0 * np.pi / nodes
    js, arcs, areas = [], [], []
    for start in range(0, nodes, chunk):
        theta = step * np.arange(start, min(nodes, start + chunk))
        sample = sigma_point(g, theta)
        w = weight(g, sample.point, conv)
        j = np.where(w > 0, np.floor(np.log2(np.where(w > 0, w, 1.0)) + BIN_SLACK), np.nan)
        js.append(j)
        arcs.append(sample.arc_element * step)
        areas.append(1.5 * sample.radius ** 2 * step)        # ∫_1^2 t dt = 3/2
    j = np.concatenate(js)
    arc = np.concatenate(arcs)
    area = np.concatenate(areas)
    zero = np.isnan(j)
    jj = j[~zero].astype(np.int64)
    if jj.size:
        lo = int(jj.min())
        idx = jj - lo
        size = int(idx.max()) + 1
        counts = np.bincount(idx, minlength=size)
        arc_bins = np.bincount(idx, weights=arc[~zero], minlength=size)
        area_bins = np.bincount(idx, weights=area[~zero], minlength=size)
        keep = counts > 0
        bins = np.arange(lo, lo + size)[keep]
        counts, arc_bins, area_bins = counts[keep], arc_bins[keep], area_bins[keep]
    else:
        bins = np.array([], dtype=np.int64)
        counts = np.array([], dtype=np.int64)
        arc_bins = area_bins = np.array([], dtype=float)
    return SublevelHistogram(bins, arc_bins, area_bins, counts,
                             float(arc[zero].sum()), float(area[zero].sum()), float(arc.sum()))


def sublevel_measure(g: Gauge, j: int, conv: WeightConvention = DEFAULT_CONVENTION,
                     nodes: int = 2 ** 20) -> float:
    return sublevel_histogram(g, conv, nodes).arclength_of(j)


def integrand_suite() -> dict[str, Callable[[np.ndarray], np.ndarray]]:
    """Smooth test integrands for the co-area consistency check."""
    def norm2(x):
        return np.sum(x * x, axis=-1)

    return {
        "one": lambda x: np.ones(x.shape[:-1]),
        "gaussian": lambda x: np.exp(-np.pi * norm2(x)),
        "polynomial": lambda x: 1.0 + x[..., 0] ** 2 - 0.5 * x[..., 0] * x[..., 1],
        "trigonometric": lambda x: np.cos(x[..., 0]) * np.sin(x[..., 1] + 0.3) + 1.0,
        "rational": lambda x: 1.0 / (1.0 + norm2(x)),
    }


# 直接运行脚本：举个示例
if __name__ == "__main__":
    from utils.gauge import make_gauge
    g = make_gauge("superellipse")
    one = integrand_suite()["one"]
    plane = plane_integral(one, g, (1.0, 2.0))
    sliced = coarea_integral(one, g, (1.0, 2.0))
    print(f"[MEASURE] superellipse(4) area of 1 <= φ <= 2: plane {plane.value:.12f}, co-area {sliced.value:.12f}")
