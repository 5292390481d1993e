# quadrature.py
"""Gauss rules, composite panels and refinement-certified results.

Every experiment module integrates through the helpers below so that node
placement, refinement and reduction order are identical everywhere; this is
what makes reports reproducible byte for byte.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import roots_jacobi

logger = logging.getLogger(__name__)

DEFAULT_ORDER = 16          # nodes per panel
NODES_PER_PERIOD = 10


class QuadratureError(ValueError):
    """Invalid quadrature request (node counts, intervals, tolerances)."""


@dataclass(frozen=True)
class QuadratureResult:
    """Value of a certified integral.

    ``error`` is the disagreement between two consecutive refinements and
    ``converged`` records whether it met the requested tolerance.
    """
    value: complex
    error: float
    converged: bool

    def __float__(self) -> float:
        return float(np.real(self.value))

    def __complex__(self) -> complex:
        return complex(self.value)


# ---------- reference rules ----------

@lru_cache(maxsize=None)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def _jacobi(order: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    # weight (1 + x)^beta on [-1, 1]
    x, w = roots_jacobi(order, 0.0, beta)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(order: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """``order``-point Gauss–Legendre nodes and weights on [a, b]."""
    if order < 1:
        raise QuadratureError(f"order must be >= 1, got {order}")
    x, w = _legendre(order)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def gauss_jacobi_left(order: int, a: float, b: float,
                      beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights with sum(w * f(x)) ~ int_a^b (x - a)^beta f(x) dx."""
    if beta <= -1.0:
        raise QuadratureError(f"Jacobi exponent must exceed -1, got {beta}")
    x, w = _jacobi(order, float(beta))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), w * half ** (1.0 + beta)


def composite_gauss_legendre(breaks: Sequence[float],
                             order: int = DEFAULT_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule over the panels delimited by ``breaks`` (sorted)."""
    breaks = np.asarray(breaks, dtype=float)
    if breaks.ndim != 1 or breaks.size < 2:
        raise QuadratureError("need at least two break points")
    if np.any(np.diff(breaks) <= 0):
        raise QuadratureError("break points must be strictly increasing")
    x, w = _legendre(order)
    lo, hi = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (hi - lo)
    nodes = 0.5 * (lo + hi) + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def cusp_composite_rule(breaks: Sequence[float], cusps: Sequence[float], power: float,
                        order: int = DEFAULT_ORDER) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Composite rule for integrands that vanish like |x - z|^power at the ``cusps``.

    Every cusp must be one of the ``breaks``. Panels touching a cusp use a Gauss–Jacobi
    rule anchored there (split at the midpoint when both ends are cusps). Returns nodes,
    weights and the anchor factor |x - z|^power (1 on plain panels), so that
    ``sum(w * f(x) / factor)`` approximates the integral of f.
    """
    breaks = np.asarray(breaks, dtype=float)
    cusps = np.sort(np.asarray(cusps, dtype=float))

    def is_cusp(v: float) -> bool:
        return bool(cusps.size) and float(np.min(np.abs(cusps - v))) <= 1e-12 * max(1.0, abs(v))

    nodes, weights, factors = [], [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        left, right = is_cusp(a), is_cusp(b)
        m = 0.5 * (a + b)
        pieces = [(a, m, "left"), (m, b, "right")] if left and right else \
            [(a, b, "left" if left else "right" if right else "")]
        for lo, hi, side in pieces:
            if side == "left":
                x, w = gauss_jacobi_left(order, lo, hi, power)
                f = (x - lo) ** power
            elif side == "right":
                s, w = gauss_jacobi_left(order, 0.0, hi - lo, power)
                x, f = hi - s, s ** power
            else:
                x, w = gauss_legendre(order, lo, hi)
                f = np.ones_like(x)
            nodes.append(x)
            weights.append(w)
            factors.append(f)
    return np.concatenate(nodes), np.concatenate(weights), np.concatenate(factors)


def uniform_breaks(a: float, b: float, panels: int) -> np.ndarray:
    return np.linspace(a, b, max(1, int(panels)) + 1)


def merge_breaks(*parts: Iterable[float], a: float, b: float,
                 min_gap: float = 1e-13) -> np.ndarray:
    """Union of break points clipped to [a, b], near-duplicates removed."""
    pts = [a, b]
    for part in parts:
        pts.extend(float(v) for v in part)
    pts = np.unique(np.clip(np.asarray(pts, dtype=float), a, b))
    keep = np.concatenate(([True], np.diff(pts) > min_gap * max(1.0, abs(b - a))))
    pts = pts[keep]
    pts[-1] = b
    return pts


def graded_breaks(centre: float, reach: float, levels: int = 12,
                  ratio: float = 0.25) -> np.ndarray:
    """Geometrically graded breaks on both sides of an endpoint singularity."""
    offsets = reach * ratio ** np.arange(levels + 1)
    return np.concatenate((centre - offsets, [centre], centre + offsets))


def panels_for_oscillation(length: float, frequency: float,
                           order: int = DEFAULT_ORDER, minimum: int = 1) -> int:
    """Panels so that every period of ``frequency`` (cycles/unit) gets >= 10 nodes."""
    periods = abs(length) * abs(frequency)
    return max(minimum, int(math.ceil(NODES_PER_PERIOD * periods / order)))


# ---------- reductions and certification ----------

def ordered_sum(values: np.ndarray, axis=None):
    """Sum in a fixed (numpy pairwise) order; contiguous copy pins the layout."""
    return np.sum(np.ascontiguousarray(values), axis=axis)


def certify(coarse, fine, tol: float, label: str = "") -> QuadratureResult:
    """Compare two consecutive refinements; flag when they disagree."""
    err = float(abs(fine - coarse))
    ok = err <= tol * max(1.0, float(abs(fine)))
    if not ok:
        logger.warning("unconverged %s: |fine - coarse| = %.3e (tol %.1e)", label or "quadrature", err, tol)
    return QuadratureResult(fine, err, ok)


def refine(evaluate: Callable[[int], complex], level: int, tol: float,
           label: str = "") -> QuadratureResult:
    """Run ``evaluate`` at ``level`` and ``2 * level`` and certify the pair."""
    coarse = evaluate(level)
    fine = evaluate(2 * level)
    return certify(coarse, fine, tol, label)


def all_converged(results: Iterable[QuadratureResult]) -> bool:
    return all(r.converged for r in results)


# ---------- worker pool ----------

def parallel_map(func: Callable, items: Sequence, workers: int = 1) -> list:
    """Order-preserving map; with one worker it runs in-process."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * workers))))
