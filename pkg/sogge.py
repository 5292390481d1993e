# sogge.py
"""Log-weighted counterexample: the model oscillatory integral g(α, s), its
stationary-phase structure, and the divergence of ‖Tf‖_{p'} for
f(t, s) = t^{-1/q'} |log t|^{-1/p'} χ_{[1, 1+ε]}(s)."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq
from scipy.special import gamma as gamma_fn
from scipy.special import gammaincc

from extension import FamilyError
from families import ExponentError
from utils.quadrature import (DEFAULT_ORDER, QuadratureResult, certify, composite_gauss_legendre,
                              gauss_jacobi_left, gauss_legendre, merge_breaks, ordered_sum,
                              panels_for_oscillation, parallel_map, refine, uniform_breaks)
from utils.report import ScanReport

logger = logging.getLogger(__name__)

ALPHA_RANGE = (1e-3, 1.0)
S_RANGE = (1.0, 1.2)
RAY_DECAY = 60.0            # stop a rotated ray once |e^{2πisψ}| <= e^{-60}
TAIL_INTERVALS = 24
JACOBI_NODES = 64
AGREEMENT_TOL = 1e-5


# ---------- parameters ----------

@dataclass(frozen=True)
class SoggeParams:
    """k, p (q = p'/(k+1)), support sizes ε, δ and γ as polynomial coefficients."""
    k: int = 3
    p: float = 1.2
    epsilon: float = 0.05
    delta: float = 0.1
    gamma: tuple[float, ...] | None = None

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 3:
            raise ExponentError(f"k must be an integer >= 3, got {self.k}")
        if not self.p > 1:
            raise ExponentError(f"p must exceed 1, got {self.p}")
        if self.q <= 1:
            raise ExponentError(f"q = p'/(k+1) = {self.q:.6g} must exceed 1 (need p' > k+1)")
        if not (0 < self.epsilon <= 0.1 and 0 < self.delta <= 0.1):
            raise FamilyError("epsilon and delta must lie in (0, 0.1]")
        a = self.coefficients
        if a.size <= self.k or np.any(np.abs(a[2:self.k]) > 1e-15):
            raise FamilyError("gamma needs vanishing derivatives of order 2..k-1")
        if not a[self.k] < 0:
            raise FamilyError("gamma needs a negative k-th derivative at 0")

    @property
    def coefficients(self) -> np.ndarray:
        if self.gamma is not None:
            return np.asarray(self.gamma, dtype=float)
        a = np.zeros(self.k + 1)
        a[0], a[1], a[self.k] = 1.0, 1.0, -1.0 / math.factorial(self.k)
        return a

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def q(self) -> float:
        return self.p_conj / (self.k + 1)

    @property
    def q_conj(self) -> float:
        return self.q / (self.q - 1.0)

    @property
    def c(self) -> float:
        return float(self.coefficients[self.k])

    def curve(self) -> Polynomial:
        return Polynomial(self.coefficients)


# ---------- oscillatory building blocks ----------

def _critical_point(psi: Polynomial) -> float:
    roots = psi.deriv().roots()
    real = roots[(np.abs(roots.imag) < 1e-12) & (roots.real > 0)].real
    if real.size == 0:
        raise FamilyError("phase has no positive critical point")
    return float(real.min())


def _near(psi: Polynomial, s: float, t1: float, q: float, sign: int, level: int,
          amp: Callable | None = None) -> complex:
    """∫_0^{t1} e^{2πi sign s ψ(t)} t^{-1/q'} amp(t) dt with t = w^q (Jacobian q w^{q-1})."""
    W = t1 ** (1.0 / q)
    probe = np.linspace(0.0, W, 2049)[1:]
    rate = s * float(np.max(np.abs(psi.deriv()(probe ** q)) * q * probe ** (q - 1.0)))
    breaks = merge_breaks(W * 2.0 ** -np.arange(1, 21), a=0.0, b=W)
    breaks = merge_breaks(breaks, uniform_breaks(0.0, W, panels_for_oscillation(W, rate)), a=0.0, b=W)
    w, ww = composite_gauss_legendre(breaks, DEFAULT_ORDER * level)
    t = w ** q
    vals = np.exp(2j * np.pi * sign * s * psi(t))
    if amp is not None:
        vals = vals * amp(t)
    return complex(q * ordered_sum(ww * vals))


def _ray(psi: Polynomial, s: float, t0: float, q_conj: float, k: int, sign: int, level: int,
         amp: Callable | None = None) -> complex:
    """∫ from t0 to t0 + ∞·e^{-i sign π/(2k)}; the phase has increasing imaginary part there."""
    direction = np.exp(-1j * sign * np.pi / (2 * k))
    slope = abs(complex(psi.deriv()(t0)))
    L = 1.0 / (2.0 * np.pi * s * max(slope, 1e-300))
    for _ in range(200):
        if 2.0 * np.pi * s * sign * psi(t0 + L * direction).imag >= RAY_DECAY:
            break
        L *= 2.0
    else:
        raise FamilyError("rotated ray did not reach decay")
    probe = psi(t0 + np.linspace(0.0, L, 513) * direction).real
    periods = s * float(np.sum(np.abs(np.diff(probe))))
    tau, wt = composite_gauss_legendre(uniform_breaks(0.0, L, panels_for_oscillation(1.0, periods, minimum=8)),
                                       DEFAULT_ORDER * level)
    t = t0 + tau * direction
    vals = np.exp(2j * np.pi * sign * s * psi(t)) * t ** (-1.0 / q_conj)
    if amp is not None:
        vals = vals * amp(t)
    return complex(ordered_sum(wt * vals) * direction)


def _Phi(sigma, k: int):
    v = sigma + 1.0
    return v - v ** k / k


def _smooth_step(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xs = np.where(inside, x, 0.5)
    f0, f1 = np.exp(-1.0 / xs), np.exp(-1.0 / (1.0 - xs))
    return np.where(x >= 1, 1.0, np.where(inside, f0 / (f0 + f1), 0.0))


def _taper(sigma, eta: float):
    """β = 1 on |σ| <= η, 0 on |σ| >= 2η, C^∞ in between."""
    return _smooth_step((2.0 * eta - np.abs(sigma)) / eta)


def _sigma_segment(lam: float, k: int, qc_inv: float, a: float, b: float, sign: int, level: int,
                   weight: Callable | None = None, extra: Sequence[float] = ()) -> complex:
    """∫_a^b e^{i sign λ Φ(σ)} (σ+1)^{-1/q'} weight(σ) dσ for a > -1."""
    dphi = max(abs(1.0 - (a + 1.0) ** (k - 1)), abs(1.0 - (b + 1.0) ** (k - 1)))
    panels = panels_for_oscillation(b - a, lam * dphi / (2.0 * np.pi), minimum=4)
    breaks = merge_breaks(uniform_breaks(a, b, panels), extra, a=a, b=b)
    x, w = composite_gauss_legendre(breaks, DEFAULT_ORDER * level)
    vals = np.exp(1j * sign * lam * _Phi(x, k)) * (x + 1.0) ** (-qc_inv)
    if weight is not None:
        vals = vals * weight(x)
    return complex(ordered_sum(w * vals))


def _sigma_head(lam: float, k: int, qc_inv: float, h: float, sign: int, level: int) -> complex:
    """∫_{-1}^{-1+h} by Gauss–Jacobi with weight (σ+1)^{-1/q'}."""
    x, w = gauss_jacobi_left(JACOBI_NODES * level, -1.0, -1.0 + h, -qc_inv)
    return complex(ordered_sum(w * np.exp(1j * sign * lam * _Phi(x, k))))


def _sigma_tail(lam: float, k: int, qc_inv: float, sign: int, level: int,
                sigma1: float = 1.0) -> tuple[complex, float]:
    """∫_{σ1}^∞ over half-period intervals, partial sums accelerated by Shanks."""
    v0 = sigma1 + 1.0
    phi0 = v0 - v0 ** k / k
    ends = [v0]
    for j in range(1, TAIL_INTERVALS + 1):
        target = j * np.pi / lam - phi0

        def f(v):
            return v ** k / k - v - target
        lo = ends[-1]
        hi = lo + 1.0
        while f(hi) < 0:
            hi *= 2.0
        ends.append(brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    partial = [0j]
    for lo, hi in zip(ends[:-1], ends[1:]):
        v, w = gauss_legendre(DEFAULT_ORDER * level, lo, hi)
        piece = ordered_sum(w * np.exp(1j * sign * lam * (v - v ** k / k)) * v ** (-qc_inv))
        partial.append(partial[-1] + complex(piece))
    try:
        with mpmath.workdps(30):
            table = mpmath.shanks([mpmath.mpc(z) for z in partial[1:]])
            best = complex(table[-1][-1])
            prev = complex(table[-2][-1])
        return best, abs(best - prev)
    except ZeroDivisionError:
        logger.warning("Shanks transform degenerated; using the plain partial sum")
        return 0.5 * (partial[-1] + partial[-2]), abs(partial[-1] - partial[-2])


def _sigma_integral(lam: float, k: int, qc_inv: float, sign: int, level: int) -> tuple[complex, float]:
    h = min(0.5, 12.0 * np.pi / lam)
    head = _sigma_head(lam, k, qc_inv, h, sign, level)
    body = _sigma_segment(lam, k, qc_inv, -1.0 + h, 1.0, sign, level, extra=(0.0,))
    tail, tail_err = _sigma_tail(lam, k, qc_inv, sign, level)
    return head + body + tail, tail_err


# ---------- the model integral g ----------

@dataclass(frozen=True)
class OscillatoryValue:
    value: complex
    compact_form: complex       # substitution + accelerated tail
    rotated_form: complex       # complex rotation of the far field
    error: float
    converged: bool
    t_star: float
    lam: float


def _check_oscillatory(alpha: float, s: float, k: int, c: float) -> None:
    if not ALPHA_RANGE[0] <= alpha <= ALPHA_RANGE[1]:
        raise FamilyError(f"alpha = {alpha} outside {ALPHA_RANGE}")
    if not S_RANGE[0] <= s <= S_RANGE[1]:
        raise FamilyError(f"s = {s} outside {S_RANGE}")
    if not c < 0:
        raise FamilyError(f"c must be negative, got {c}")
    if int(k) != k or k < 3:
        raise FamilyError(f"k must be an integer >= 3, got {k}")


def critical_scale(alpha: float, k: int, c: float) -> float:
    """t* = (1 / (k |c| α))^{1/(k-1)}, the critical point of t + cαt^k."""
    return (1.0 / (k * abs(c) * alpha)) ** (1.0 / (k - 1))


def oscillatory_g(alpha: float, s: float, k: int, q: float, c: float | None = None,
                  sign: int = 1, tol: float = AGREEMENT_TOL) -> OscillatoryValue:
    """g(α, s) = ∫_0^∞ e^{2πi s(t + cαt^k)} t^{-1/q'} dt, regularised two ways.

    ``sign = -1`` flips the phase (the complex conjugate for real parameters).
    """
    c = -1.0 / math.factorial(k) if c is None else c
    _check_oscillatory(alpha, s, k, c)
    qc_inv = 1.0 - 1.0 / q
    t_star = critical_scale(alpha, k, c)
    lam = 2.0 * np.pi * s * t_star
    pref = t_star ** (1.0 / q)

    def compact(level):
        value, tail_err = _sigma_integral(lam, k, qc_inv, sign, level)
        return pref * value, pref * tail_err

    psi = Polynomial([0.0, 1.0] + [0.0] * (k - 2) + [c * alpha])
    t1 = 2.0 * t_star

    def rotated(level):
        return (_near(psi, s, t1, q, sign, level)
                + _ray(psi, s, t1, 1.0 / qc_inv, k, sign, level))

    (a1, _), (a2, tail_err) = compact(1), compact(2)
    ra = certify(a1, a2, tol * 1e-2, "oscillatory_g/compact")
    rb = refine(rotated, 1, tol * 1e-2, "oscillatory_g/rotated")
    gap = abs(ra.value - rb.value)
    agree = gap <= tol * abs(rb.value)
    if not agree:
        logger.warning("oscillatory_g(%.4g, %.4g): regularisations differ by %.3e", alpha, s, gap)
    converged = agree and ra.converged and rb.converged and tail_err <= tol * abs(rb.value)
    return OscillatoryValue(complex(rb.value), complex(ra.value), complex(rb.value),
                            max(gap, ra.error, rb.error), converged, t_star, lam)


def _g_task(task) -> OscillatoryValue:
    alpha, s, k, q, c = task
    return oscillatory_g(alpha, s, k, q, c)


def oscillatory_sweep(alphas: Sequence[float], ss: Sequence[float], k: int, q: float,
                      c: float | None = None, workers: int = 1) -> ScanReport:
    c = -1.0 / math.factorial(k) if c is None else c
    tasks = [(float(a), float(s), k, q, c) for a in alphas for s in ss]
    report = ScanReport("oscillatory", ["alpha", "s", "re_g", "im_g", "abs_g", "converged"])
    for (a, s, *_), val in zip(tasks, parallel_map(_g_task, tasks, workers)):
        report.add(a, s, val.value.real, val.value.imag, abs(val.value), val.converged)
        report.flag_unconverged(val.converged)
        report.check(math.isfinite(abs(val.value)),
                     abs(val.compact_form - val.rotated_form) / max(abs(val.value), 1e-300))
    return report


# ---------- stationary phase ----------

@dataclass(frozen=True)
class StationaryPieces:
    near: complex
    left: complex
    right: complex
    total: complex
    lam: float
    t_star: float

    @property
    def partition_residual(self) -> float:
        return abs(self.near + self.left + self.right - self.total) / abs(self.total)


def stationary_pieces(alpha: float, s: float, k: int, q: float, c: float | None = None,
                      eta: float = 0.25, level: int = 2) -> StationaryPieces:
    """Split the compact-form integral with the bump β into near / left / right parts."""
    c = -1.0 / math.factorial(k) if c is None else c
    _check_oscillatory(alpha, s, k, c)
    if not 0 < eta < 0.25 + 1e-12:
        raise FamilyError(f"eta must lie in (0, 1/4], got {eta}")
    qc_inv = 1.0 - 1.0 / q
    t_star = critical_scale(alpha, k, c)
    lam = 2.0 * np.pi * s * t_star
    h = min(0.5, 12.0 * np.pi / lam)

    def zone(a, b):
        return np.linspace(a, b, 9)

    kinks = np.concatenate((zone(-2 * eta, -eta), zone(eta, 2 * eta)))
    near = _sigma_segment(lam, k, qc_inv, -2 * eta, 2 * eta, 1, level,
                          lambda x: _taper(x, eta), kinks)
    head = _sigma_head(lam, k, qc_inv, h, 1, level)
    left = head + _sigma_segment(lam, k, qc_inv, -1.0 + h, 0.0, 1, level,
                                 lambda x: 1.0 - _taper(x, eta), kinks)
    tail, _ = _sigma_tail(lam, k, qc_inv, 1, level)
    right = _sigma_segment(lam, k, qc_inv, 0.0, 1.0, 1, level,
                           lambda x: 1.0 - _taper(x, eta), kinks) + tail
    total, _ = _sigma_integral(lam, k, qc_inv, 1, level)
    return StationaryPieces(near, left, right, total, lam, t_star)


def stationary_phase_check(k: int, q: float, alphas: Sequence[float] = tuple(np.geomspace(0.01, 0.05, 5)),
                           ss: Sequence[float] = (1.0, 1.05, 1.1), c: float | None = None,
                           eta: float = 0.25) -> ScanReport:
    """Fit the α-exponent of the localised stationary contribution t*^{1/q}|near|.

    The t = 0 endpoint term has fixed size and a rotating phase, so log|g|
    itself oscillates; |g| is only checked against a positive lower envelope.
    """
    c = -1.0 / math.factorial(k) if c is None else c
    qc_inv = 1.0 - 1.0 / q
    oracle = -(1.0 / (k - 1)) * (0.5 - qc_inv)
    report = ScanReport("stationary-phase",
                        ["alpha", "s", "lambda", "abs_g", "abs_near", "abs_left", "abs_right",
                         "partition_residual"])
    xs, ys, near_c, left_c, right_c, lower = [], [], [], [], [], []
    for a in alphas:
        for s in ss:
            pc = stationary_pieces(float(a), float(s), k, q, c, eta)
            pref = pc.t_star ** (1.0 / q)
            report.add(float(a), float(s), pc.lam, pref * abs(pc.total), abs(pc.near),
                       abs(pc.left), abs(pc.right), pc.partition_residual)
            report.check(pc.partition_residual <= 1e-8, pc.partition_residual)
            xs.append(math.log(a))
            ys.append(math.log(pref * abs(pc.near) * math.sqrt(s)))
            near_c.append(abs(pc.near) * pc.lam ** 0.5)
            left_c.append(abs(pc.left) * pc.lam ** (1.0 - qc_inv))
            right_c.append(abs(pc.right) * pc.lam)
            lower.append(pref * abs(pc.total) * math.sqrt(s) * a ** (-oracle))
    slope, intercept = np.polyfit(xs, ys, 1)
    fit_residual = float(np.max(np.abs(np.expm1(np.asarray(ys) - (slope * np.asarray(xs) + intercept)))))
    slope_error = abs(slope - oracle) / abs(oracle)
    report.check(slope_error <= 0.15, slope_error)
    report.check(fit_residual <= 0.15, fit_residual)
    report.check(min(lower) > 0)

    s_line = np.linspace(1.0, 1.1, 6)
    comp = [stationary_pieces(0.03, float(s), k, q, c, eta) for s in s_line]
    scaled = np.array([p.t_star ** (1.0 / q) * abs(p.near) * math.sqrt(s) for p, s in zip(comp, s_line)])
    s_variation = float(scaled.max() / scaled.min() - 1.0)
    report.check(s_variation < 0.2, s_variation)

    report.extras.update(slope=float(slope), oracle_slope=oracle, fit_residual=fit_residual,
                         near_constant=min(near_c), left_constant=max(left_c),
                         right_constant=max(right_c), lower_envelope=min(lower),
                         s_variation=s_variation)
    logger.info("stationary phase: slope %.4f vs %.4f", slope, oracle)
    return report


# ---------- the counterexample family ----------

class SoggeFamily:
    """Evaluators for f, Tf and the rescaled integrals I, J."""

    def __init__(self, sp: SoggeParams):
        self.sp = sp
        self.curve = sp.curve()
        a = sp.coefficients.copy()
        a[:2] = 0.0
        self.Gamma = Polynomial(a)              # γ(t) - γ(0) - tγ'(0)
        self._v0 = abs(math.log(sp.delta))

    def f(self, t, s):
        """t^{-1/q'} |log t|^{-1/p'} on (0, 1) x [1, 1 + ε]; T and mass integrate it over t < δ."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        sp = self.sp
        inside = (s >= 1.0) & (s <= 1.0 + sp.epsilon) & (t > 0) & (t < 1.0)
        safe = np.where(inside, t, 0.5)
        return np.where(inside, safe ** (-1.0 / sp.q_conj) * np.abs(np.log(safe)) ** (-1.0 / sp.p_conj), 0.0)

    def _v_rule(self, level: int, frequency: float = 0.0):
        sp = self.sp
        span = 40.0 * sp.q
        panels = max(40, panels_for_oscillation(span, frequency))
        return composite_gauss_legendre(uniform_breaks(self._v0, self._v0 + span, panels),
                                        DEFAULT_ORDER * level)

    def mass(self) -> QuadratureResult:
        """∫_0^δ t^{-1/q'} |log t|^{-1/p'} dt with t = e^{-v}."""
        sp = self.sp

        def evaluate(level):
            v, w = self._v_rule(level)
            return float(ordered_sum(w * np.exp(-v / sp.q) * v ** (-1.0 / sp.p_conj)))

        return refine(evaluate, 1, 1e-12, "sogge mass")

    def mass_closed_form(self) -> float:
        """q^{1/p} Γ(1/p) Q(1/p, |log δ|/q), an upper incomplete gamma function."""
        sp = self.sp
        a = 1.0 / sp.p
        return float(sp.q ** a * gamma_fn(a) * gammaincc(a, self._v0 / sp.q))

    def T(self, x: float, y: float, r: float, tol: float = 1e-8) -> QuadratureResult:
        sp = self.sp
        slope = abs(x) + abs(y) * float(np.max(np.abs(self.curve.deriv()(np.linspace(0, sp.delta, 65)))))

        def evaluate(level):
            v, wv = self._v_rule(level, 1.2 * slope * sp.delta)
            s, ws = gauss_legendre(8 * level, 1.0, 1.0 + sp.epsilon)
            t = np.exp(-v)
            amp = np.exp(-v / sp.q) * v ** (-1.0 / sp.p_conj)
            phase = 2j * np.pi * s[:, None] * (x * t + y * self.curve(t) + r)[None, :]
            return complex(ordered_sum(ws[:, None] * np.exp(phase) * (wv * amp)[None, :]))

        return refine(evaluate, 1, tol, "Tf")

    def phase(self, u: float, alpha: float) -> Polynomial:
        """t + α u^k Γ(t/u) as a polynomial in t."""
        k = self.sp.k
        a = self.Gamma.coef
        coef = np.zeros(a.size)
        coef[1] = 1.0
        j = np.arange(k, a.size)
        coef[k:] += alpha * a[k:] * float(u) ** (k - j).astype(float)
        return Polynomial(coef)

    def I(self, u: float, alpha: float, s: float, level: int = 1) -> complex:
        """∫_0^{uδ} e^{2πis(t + αu^kΓ(t/u))} t^{-1/q'} (1 - log t / log u)^{-1/p'} dt."""
        sp = self.sp
        if u <= 10:
            raise FamilyError(f"u must exceed 10, got {u}")
        log_u = math.log(u)

        def amp(t):
            return (1.0 - np.log(t) / log_u) ** (-1.0 / sp.p_conj)

        psi = self.phase(u, alpha)
        end = u * sp.delta
        t1 = 2.0 * _critical_point(psi)
        if t1 >= end:
            return _near(psi, s, end, sp.q, 1, level, amp)
        return (_near(psi, s, t1, sp.q, 1, level, amp)
                + _ray(psi, s, t1, sp.q_conj, sp.k, 1, level, amp)
                - _ray(psi, s, end, sp.q_conj, sp.k, 1, level, amp))

    def J(self, u: float, alpha: float, r: float, s_nodes: int = 8) -> complex:
        s, ws = gauss_legendre(s_nodes, 1.0, 1.0 + self.sp.epsilon)
        vals = np.array([self.I(u, alpha, float(si)) for si in s])
        return complex(ordered_sum(ws * vals * np.exp(2j * np.pi * s * r)))


def sogge_family(sp: SoggeParams) -> SoggeFamily:
    return SoggeFamily(sp)


# ---------- witnesses and divergence ----------

@dataclass(frozen=True)
class Witness:
    alpha1: float
    alpha2: float
    r2: float
    A: float
    scores: tuple = field(default_factory=tuple)


def choose_witness_intervals(sp: SoggeParams, candidates: Sequence[float] = tuple(np.geomspace(0.005, 0.05, 10)),
                             width_ratio: float = 1.25, s_nodes: int = 8, workers: int = 1) -> Witness:
    """Pick [α1, α2] maximising min_α |∫ g(α, s) ds| and r2 with 2πr2(1+ε)∫|g| <= A/4."""
    s, ws = gauss_legendre(s_nodes, 1.0, 1.0 + sp.epsilon)
    best = None
    scores = []
    for a in candidates:
        alphas = (float(a), float(a * width_ratio ** 0.5), float(a * width_ratio))
        tasks = [(al, float(si), sp.k, sp.q, sp.c) for al in alphas for si in s]
        vals = np.array([v.value for v in parallel_map(_g_task, tasks, workers)]).reshape(3, -1)
        integral = np.abs(vals @ ws)
        mass = np.abs(vals) @ ws
        score = float(integral.min())
        scores.append((float(a), score))
        if best is None or score > best[0]:
            best = (score, alphas, float(mass.max()))
    score, alphas, mass = best
    r2 = min(1.0, 0.25 * score / (2.0 * np.pi * (1.0 + sp.epsilon) * mass))
    return Witness(alphas[0], alphas[-1], r2, score, tuple(scores))


def _I_task(task) -> list[complex]:
    sp_fields, u, alpha, s_list = task
    fam = SoggeFamily(SoggeParams(**sp_fields))
    return [fam.I(u, alpha, s) for s in s_list]


def _params_dict(sp: SoggeParams) -> dict:
    return {"k": sp.k, "p": sp.p, "epsilon": sp.epsilon, "delta": sp.delta, "gamma": sp.gamma}


def sogge_divergence_scan(sp: SoggeParams, u_max_grid: Sequence[float] = (1e4, 1e5, 1e6),
                          R: float = 1e3, witness: Witness | None = None,
                          workers: int = 1) -> ScanReport:
    """Partial masses M(U) = ∫∫∫_R^U |J|^{p'} du/(u log u) dα dr and min |J| on the box."""
    grid = np.asarray(sorted(u_max_grid), dtype=float)
    if grid[0] <= R or grid[-1] > 1e6 * (1 + 1e-12):
        raise FamilyError(f"u_max grid must lie in ({R:g}, 1e6]")
    witness = witness or choose_witness_intervals(sp, workers=workers)
    alpha, wa = gauss_legendre(4, witness.alpha1, witness.alpha2)
    r, wr = gauss_legendre(4, 0.0, witness.r2)
    s, ws = gauss_legendre(8, 1.0, 1.0 + sp.epsilon)
    edges = np.log(np.log(np.concatenate(([R], grid))))
    v_nodes, v_weights, v_panel = [], [], []
    for i in range(grid.size):
        v, w = gauss_legendre(4, edges[i], edges[i + 1])
        v_nodes.extend(v)
        v_weights.extend(w)
        v_panel.extend([i] * 4)
    u_nodes = np.exp(np.exp(np.asarray(v_nodes)))
    r_box = np.concatenate(([0.0], r, [witness.r2]))

    tasks = [(_params_dict(sp), float(u), float(a), [float(si) for si in s])
             for u in u_nodes for a in alpha]
    rows = parallel_map(_I_task, tasks, workers)
    I_vals = np.array(rows).reshape(u_nodes.size, alpha.size, s.size)
    phase = np.exp(2j * np.pi * s[:, None] * r_box[None, :])              # (s, r)
    J = np.einsum("s,uas,sr->uar", ws, I_vals, phase)
    absJ = np.abs(J)
    integrand = absJ[:, :, 1:-1] ** sp.p_conj
    per_u = np.einsum("a,r,uar->u", wa, wr, integrand) * np.asarray(v_weights)
    ones = np.einsum("a,r->", wa, wr) * np.asarray(v_weights)

    report = ScanReport("sogge", ["u_max", "partial_mass", "min_abs_J"])
    panel = np.asarray(v_panel)
    masses, increments = [], []
    for i, U in enumerate(grid):
        mass = float(ordered_sum(per_u[panel <= i]))
        increments.append(float(ordered_sum(per_u[panel == i])))
        masses.append(mass)
        report.add(float(U), mass, float(absJ[panel <= i].min()))
    min_J = float(absJ.min())

    closed = witness.r2 * (witness.alpha2 - witness.alpha1) * (edges[-1] - edges[0])
    harness = abs(float(ordered_sum(ones)) - closed) / closed
    report.check(harness <= 1e-8, harness)
    report.check(all(b > a for a, b in zip(masses, masses[1:])) and masses[0] > 0)
    ratios = [b / a for a, b in zip(increments, increments[1:])]
    report.check(all(0.5 <= x <= 1.5 for x in ratios))
    report.check(min_J >= 0.5 * witness.A)
    report.extras.update(alpha1=witness.alpha1, alpha2=witness.alpha2, r2=witness.r2,
                         A_witness=witness.A, min_abs_J=min_J, increment_ratios=ratios,
                         harness_residual=harness)
    logger.info("sogge scan: min|J| = %.4g (witness %.4g), increments %s", min_J, witness.A,
                ", ".join(f"{x:.3f}" for x in ratios))
    return report


def convergence_profile(sp: SoggeParams, alphas: Sequence[float], ss: Sequence[float],
                        us: Sequence[float] = (1e3, 1e4, 1e5, 1e6)) -> list[tuple[float, float]]:
    """(u, sup over the (α, s) grid of |I(u, α, s) - g(α, s)| / |g(α, s)|)."""
    fam = SoggeFamily(sp)
    g = {(a, s): oscillatory_g(a, s, sp.k, sp.q, sp.c).value for a in alphas for s in ss}
    out = []
    for u in us:
        worst = max(abs(fam.I(u, a, s) - g[(a, s)]) / abs(g[(a, s)]) for a in alphas for s in ss)
        out.append((float(u), float(worst)))
    return out


# 直接运行脚本：举个示例
if __name__ == "__main__":
    sp = SoggeParams()
    val = oscillatory_g(0.05, 1.0, sp.k, sp.q, sp.c)
    print(f"[SOGGE] g(0.05, 1) = {val.value:.10f}; compact vs rotated gap "
          f"{abs(val.compact_form - val.rotated_form):.2e}, converged {val.converged}")
    fam = SoggeFamily(sp)
    print(f"[SOGGE] mass {float(fam.mass()):.12f} vs closed form {fam.mass_closed_form():.12f}")
