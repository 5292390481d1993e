# main.py
"""conelab driver: every experiment is a subcommand writing a CSV / JSON report.

Exit status: 0 all checks pass, 1 a check failed, 2 unconverged quadrature,
64 bad configuration.

Usage example
-------------
```bash
python main.py weight-audit --gauge circle --out -
python main.py affine-check --gauge superellipse --seed 42 --out outs/affine.csv
python main.py knapp-scan --gauge circle --p 1.2 --q 2 --workers 4
python main.py sogge --format json
```
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from extension import (ConeDensity, FamilyError, OscillationBudgetError, extension_eval,
                       extension_eval_sliced)
from families import (DEFAULT_DELTAS, ExponentError, critical_q_scan, dyadic_min_optimize,
                      knapp_scan, subcritical_exponents)
from measure import (MeasureError, WeightedConeMeasure, coarea_integral, cone_norm, integrand_suite,
                     lorentz_norm, log_grid_samples, plane_integral, sublevel_histogram)
from sogge import (SoggeParams, choose_witness_intervals, convergence_profile, oscillatory_sweep,
                   sogge_divergence_scan, stationary_phase_check)
from utils.gauge import (GaugeError, GaugeSpec, circle_spec, convexity_audit, load_spec, make_gauge,
                         sigma_point)
from utils.generator import random_unit_vectors
from utils.quadrature import QuadratureError, all_converged
from utils.report import ScanReport, summary_table, write_report
from weight import (WeightConvention, covariance_suite, curvature_identity_residual,
                    curvature_identity_residual_nd, gaussian_curvature_graph, weight)

logger = logging.getLogger("conelab")

EXIT_CONFIG = 64
WORKERS_ENV = "CONELAB_WORKERS"
TOLERANCE_RANGE = (1e-12, 1e-2)
FORMATS = ("csv", "json")
DOMAIN_ERRORS = (GaugeError, MeasureError, QuadratureError, FamilyError, ExponentError,
                 OscillationBudgetError)


class ConfigError(ValueError):
    """Malformed run configuration."""


# ---------- configuration ----------

@dataclass
class RunConfig:
    gauge: GaugeSpec = field(default_factory=circle_spec)
    tolerance: float = 1e-8
    seed: int = 0
    workers: int = 1
    out: str | None = None
    fmt: str = "csv"
    convention: WeightConvention = WeightConvention.POSITIVE_ADJUGATE

    def __post_init__(self):
        lo, hi = TOLERANCE_RANGE
        if not lo <= self.tolerance <= hi:
            raise ConfigError(f"tolerance {self.tolerance:g} outside [{lo:g}, {hi:g}]")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.fmt not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got '{self.fmt}'")

    def to_dict(self) -> dict[str, Any]:
        """What goes into JSON reports; workers and out never change the numbers."""
        return {"gauge": self.gauge.to_dict(), "tolerance": self.tolerance,
                "seed": self.seed, "convention": self.convention.value}


def _read_config_file(path: str) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - {"gauge", "tolerance", "seed", "workers", "out", "format", "convention"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def build_config(args: argparse.Namespace, default_gauge: str = "circle") -> RunConfig:
    """Flags win over the --config file, which wins over CONELAB_WORKERS and defaults."""
    file_cfg = _read_config_file(args.config) if args.config else {}

    def pick(flag, key, default):
        if flag is not None:
            return flag
        return file_cfg.get(key, default)

    env_workers = os.environ.get(WORKERS_ENV)
    try:
        workers_default = int(env_workers) if env_workers else 1
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got '{env_workers}'") from None

    gauge = pick(args.gauge, "gauge", default_gauge)
    try:
        spec = GaugeSpec.from_dict(gauge) if isinstance(gauge, dict) else load_spec(str(gauge))
        make_gauge(spec)
        convention = WeightConvention.parse(pick(args.convention, "convention",
                                                 WeightConvention.POSITIVE_ADJUGATE.value))
    except GaugeError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        return RunConfig(gauge=spec,
                         tolerance=float(pick(args.tolerance, "tolerance", 1e-8)),
                         seed=int(pick(args.seed, "seed", 0)),
                         workers=int(pick(args.workers, "workers", workers_default)),
                         out=pick(args.out, "out", None),
                         fmt=pick(args.format, "format", "csv"),
                         convention=convention)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


# ---------- subcommands ----------

def run_weight_audit(cfg: RunConfig, args: argparse.Namespace) -> ScanReport:
    """Homogeneity, Euler relation, Hessian annihilation, convexity and sign of w."""
    g = make_gauge(cfg.gauge)
    n = g.dimension
    rng = np.random.default_rng(cfg.seed)
    xi = random_unit_vectors(rng, args.points, n) * rng.uniform(0.5, 2.0, (args.points, 1))
    lam = rng.uniform(0.1, 10.0, args.points)

    value, grad, hess = g.jet(xi)
    w = weight(g, xi, cfg.convention)
    w_scaled = weight(g, xi * lam[:, None], cfg.convention)
    homogeneity = np.abs(w_scaled * lam ** (n - 2) - w) / np.maximum(np.abs(w), 1e-12)
    euler = np.abs(np.einsum("ij,ij->i", grad, xi) - value) / value
    scale = np.maximum(np.linalg.norm(hess, axis=(1, 2)), 1e-300)
    annihilation = np.linalg.norm(np.einsum("ijk,ik->ij", hess, xi), axis=1) / (scale * np.linalg.norm(xi, axis=1))
    min_eig = np.linalg.eigvalsh(hess)[:, 0] / scale
    is_circle = cfg.gauge.kind == "circle" and n == 2

    report = ScanReport("weight-audit", ["index", "w", "homogeneity", "euler", "annihilation", "min_eig"])
    for i in range(args.points):
        report.add(i, float(w[i]), float(homogeneity[i]), float(euler[i]), float(annihilation[i]),
                   float(min_eig[i]))
    report.check(float(homogeneity.max()) <= 1e-8, float(homogeneity.max()))
    report.check(float(euler.max()) <= 1e-10, float(euler.max()))
    report.check(float(annihilation.max()) <= 1e-8, float(annihilation.max()))
    report.check(float(min_eig.min()) >= -1e-10)
    if cfg.convention is WeightConvention.POSITIVE_ADJUGATE:
        report.check(float(w.min()) >= -1e-10)
    if is_circle and cfg.convention is WeightConvention.POSITIVE_ADJUGATE:
        dev = float(np.max(np.abs(w - 1.0)))
        report.check(dev <= 1e-10, dev)
        report.extras["circle_deviation"] = dev
    report.extras.update(w_min=float(w.min()), w_max=float(w.max()))
    return report


def run_curvature_check(cfg: RunConfig, args: argparse.Namespace) -> ScanReport:
    g = make_gauge(cfg.gauge)
    report = ScanReport("curvature-check", ["index", "curvature", "residual"])
    if g.dimension == 2:
        theta = 2.0 * np.pi * np.arange(args.points) / args.points
        sample = sigma_point(g, theta)
        residual = curvature_identity_residual(g, theta, cfg.convention)
        for i in range(args.points):
            flat = sample.curvature[i] < 1e-12
            report.add(i, float(sample.curvature[i]), 0.0 if flat else float(residual[i]))
            if not flat:
                report.check(residual[i] <= 1e-6, float(residual[i]))
        return report
    rng = np.random.default_rng(cfg.seed)
    v = random_unit_vectors(rng, args.points, g.dimension)
    points = v / g(v)[:, None]
    for i, p in enumerate(points):
        kappa = gaussian_curvature_graph(g, p)
        res = curvature_identity_residual_nd(g, p, cfg.convention)
        report.add(i, kappa, res)
        if kappa >= 1e-12:
            report.check(res <= 1e-6, res)
    return report


def run_affine_check(cfg: RunConfig, args: argparse.Namespace) -> ScanReport:
    g = make_gauge(cfg.gauge)
    report = ScanReport("affine-check", ["index", "det", "residual"])
    for i, (det, res) in enumerate(covariance_suite(g, args.count, cfg.seed, cfg.convention)):
        report.add(i, det, res)
        report.check(res <= 1e-6, res)
    return report


def run_coarea_check(cfg: RunConfig, args: argparse.Namespace) -> ScanReport:
    g = make_gauge(cfg.gauge)
    if g.dimension != 2:
        raise ConfigError("coarea-check needs a planar gauge")
    report = ScanReport("coarea-check", ["integrand", "plane", "coarea", "rel_diff"])
    t_range = (args.t_min, args.t_max)
    for name, f in integrand_suite().items():
        direct = plane_integral(f, g, t_range, tol=cfg.tolerance)
        sliced = coarea_integral(f, g, t_range, tol=cfg.tolerance)
        rel = abs(sliced.value - direct.value) / abs(direct.value)
        report.add(name, float(direct), float(sliced), rel)
        report.check(rel <= 1e-5, rel)
        report.flag_unconverged(all_converged((direct, sliced)))
    return report


def run_slice_check(cfg: RunConfig, args: argparse.Namespace) -> ScanReport:
    """extension_eval against extension_eval_sliced on seeded (x, t) points."""
    g = make_gauge(cfg.gauge)
    if g.dimension != 2:
        raise ConfigError("slice-check needs a planar gauge")
    mu = WeightedConeMeasure(g)
    u = ConeDensity("gaussian", 1.0)
    limit = 1e-5 if not g.flat_directions() else 1e-4
    floor = 1e-3 * float(cone_norm(u, mu, 1.0, tol=cfg.tolerance))
    rng = np.random.default_rng(cfg.seed)
    xs = rng.uniform(-math.sqrt(2.0), math.sqrt(2.0), (args.points, 2))
    ts = rng.uniform(-2.0, 2.0, args.points)

    report = ScanReport("slice-check", ["x1", "x2", "t", "re_direct", "im_direct",
                                        "re_sliced", "im_sliced", "rel_diff"])
    for x, t in zip(xs, ts):
        direct = extension_eval(g, u, x, t, mu, cfg.tolerance)
        sliced = extension_eval_sliced(g, u, x, t, mu, cfg.tolerance)
        d, s = complex(direct), complex(sliced)
        rel = abs(d - s) / max(abs(d), floor)
        report.add(float(x[0]), float(x[1]), float(t), d.real, d.imag, s.real, s.imag, rel)
        report.check(rel <= limit, rel)
        report.flag_unconverged(all_converged((direct, sliced)))
    if cfg.gauge.kind == "circle":
        # (u dμ)ˇ(0, t) = 1/(1 - it) for u = e^{-2πφ}; the sliced columns hold the closed form
        exact = 1.0 / (1.0 - 1j)
        direct = extension_eval(g, ConeDensity(), np.zeros(2), 1.0, mu, cfg.tolerance)
        d = complex(direct)
        rel = abs(d - exact) / abs(exact)
        report.add(0.0, 0.0, 1.0, d.real, d.imag, exact.real, exact.imag, rel)
        report.check(rel <= 1e-6, rel)
        report.flag_unconverged(direct.converged)
    return report


def run_sublevel(cfg: RunConfig, args: argparse.Namespace) -> ScanReport:
    g = make_gauge(cfg.gauge)
    hist = sublevel_histogram(g, cfg.convention, args.nodes)
    report = ScanReport("sublevel", ["j", "sigma_arclength", "delta_area"])
    for row in hist.rows():
        report.add(*row)
    completeness = hist.completeness_residual()
    report.check(completeness <= 1e-6, completeness)
    k = convexity_audit(g).contact_order
    report.extras.update(completeness=completeness, contact_order=k)
    if k is None:
        report.check(False)
    elif round(k) > 2:
        expected = 1.0 / (round(k) - 2)
        slope = hist.fit_slope()
        error = abs(slope - expected) / expected if math.isfinite(slope) else float("inf")
        report.check(error <= 0.1, error)
        report.extras.update(slope=slope, expected_slope=expected, fit=hist.fit)
    return report


def run_knapp_scan(cfg: RunConfig, args: argparse.Namespace) -> ScanReport:
    g = make_gauge(cfg.gauge)
    if args.q_grid:
        return critical_q_scan(g, args.p, args.q_grid, args.theta0, DEFAULT_DELTAS,
                               cfg.tolerance, cfg.workers)
    return knapp_scan(g, args.p, args.q, DEFAULT_DELTAS, args.theta0, args.profile,
                      cfg.tolerance, cfg.workers)


def run_exponents(cfg: RunConfig, args: argparse.Namespace) -> ScanReport:
    """Exact exponent identities, the dyadic optimisation contract and the weak-norm identity."""
    report = ScanReport("exponents", ["check", "k", "p", "alpha", "E", "value", "residual"])
    nan = float("nan")
    for k in range(3, 8):
        for m in range(1, 11):
            p = 1 + Fraction(m, 11 * (k + 1))
            q = (p / (p - 1)) / (k + 1)
            sub = subcritical_exponents(p, q, k)
            worst = max(sub.residuals.values())
            report.add("subcritical", k, str(p), nan, nan, float(sub.rho), worst)
            report.check(sub.holds, worst)

    sub = subcritical_exponents(Fraction(6, 5), Fraction(3, 2), 3)
    ratios, envelopes = [], []
    for alpha in np.geomspace(1e-2, 1e2, 10):
        for E in np.geomspace(1e-2, 1e2, 10):
            b = dyadic_min_optimize(float(alpha), float(E), 3, sub.tau, sub.rho)
            factor = max(b.brute_ratio, 1.0 / b.brute_ratio)
            ratios.append(factor)
            envelopes.append(b.envelope_ratio)
            report.add("dyadic", 3, "6/5", float(alpha), float(E), b.bound, factor)
            report.check(factor <= 4.0)
    spread = max(envelopes) / min(envelopes)
    report.check(max(envelopes) <= 8.0 and min(envelopes) >= 1.0 / 8.0)

    p_conj = 4.0
    samples = log_grid_samples(lambda s: s ** (-2.0 / p_conj), 1e-6, 1e6, 20001)
    weak = lorentz_norm(samples, p_conj / 2.0, math.inf)
    report.add("weak-norm", nan, "4/3", nan, nan, weak, abs(weak - 1.0))
    report.check(abs(weak - 1.0) <= 1e-3, abs(weak - 1.0))
    report.extras.update(max_brute_factor=max(ratios), envelope_range=[min(envelopes), max(envelopes)],
                         envelope_spread=spread, weak_norm=weak)
    return report


def _sogge_params(args: argparse.Namespace) -> SoggeParams:
    return SoggeParams(k=args.k, p=args.p, epsilon=args.epsilon, delta=args.delta)


def run_sogge(cfg: RunConfig, args: argparse.Namespace) -> ScanReport:
    sp = _sogge_params(args)
    witness = choose_witness_intervals(sp, workers=cfg.workers)
    report = sogge_divergence_scan(sp, args.u_max, args.R, witness, cfg.workers)
    profile = convergence_profile(sp, (witness.alpha1, witness.alpha2), (1.0, 1.0 + sp.epsilon))
    gaps = [gap for _, gap in profile]
    report.check(all(b <= a * (1 + 1e-9) for a, b in zip(gaps, gaps[1:])))
    report.extras["convergence_profile"] = profile
    return report


def run_oscillatory(cfg: RunConfig, args: argparse.Namespace) -> ScanReport:
    sp = _sogge_params(args)
    report = oscillatory_sweep(np.geomspace(1e-3, 1.0, args.alphas), args.s, sp.k, sp.q, sp.c,
                               cfg.workers)
    stationary = stationary_phase_check(sp.k, sp.q, c=sp.c)
    report.check(stationary.passed, stationary.max_residual)
    report.extras["stationary"] = dict(stationary.extras)
    report.extras["stationary_rows"] = [dict(zip(stationary.columns, r)) for r in stationary.rows]
    return report


REPORT_GAUGES = ("circle", "ellipse", "superellipse(4)")
REPORT_STEPS = ("weight-audit", "curvature-check", "affine-check", "coarea-check")


def run_report(cfg: RunConfig, args: argparse.Namespace) -> ScanReport:
    """Desk-scale pass over the planar subcommands on the three built-in gauges."""
    parser = build_parser()
    reports = []
    for gauge in REPORT_GAUGES:
        for step in REPORT_STEPS + (("slice-check",) if gauge == "circle" else ()):
            sub_args = parser.parse_args([step, "--gauge", gauge, "--seed", str(cfg.seed)])
            sub_cfg = RunConfig(load_spec(gauge), cfg.tolerance, cfg.seed, cfg.workers,
                                None, cfg.fmt, cfg.convention)
            r = SUBCOMMANDS[step](sub_cfg, sub_args)
            r.name = f"{step}[{gauge}]"
            reports.append(r)
    exp_args = parser.parse_args(["exponents"])
    reports.append(run_exponents(cfg, exp_args))
    if args.full:
        for step in ("knapp-scan", "oscillatory", "sogge"):
            r = SUBCOMMANDS[step](cfg, parser.parse_args([step]))
            reports.append(r)
    return summary_table(reports)


SUBCOMMANDS: dict[str, Callable[[RunConfig, argparse.Namespace], ScanReport]] = {
    "weight-audit": run_weight_audit,
    "curvature-check": run_curvature_check,
    "affine-check": run_affine_check,
    "coarea-check": run_coarea_check,
    "slice-check": run_slice_check,
    "sublevel": run_sublevel,
    "knapp-scan": run_knapp_scan,
    "exponents": run_exponents,
    "sogge": run_sogge,
    "oscillatory": run_oscillatory,
    "report": run_report,
}

DEFAULT_GAUGES = {"sublevel": "superellipse(4)"}


# ---------- argument parsing ----------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gauge", type=str, default=None,
                   help="circle | ellipse | sphere | superellipse(k) | inline JSON | JSON file")
    p.add_argument("--config", type=str, default=None, help="JSON config file (flags win)")
    p.add_argument("--tolerance", type=float, default=None, help="quadrature tolerance [1e-8]")
    p.add_argument("--seed", type=int, default=None, help="RNG seed [0]")
    p.add_argument("--workers", type=int, default=None, help=f"worker processes [{WORKERS_ENV} or 1]")
    p.add_argument("--out", type=str, default=None, help='report path ("-" → stdout) [outs/<subcommand>.<fmt>]')
    p.add_argument("--format", choices=FORMATS, default=None, help="report format [csv]")
    p.add_argument("--convention", type=str, default=None,
                   help="positive-adjugate | negative-adjugate [positive-adjugate]")


def _sogge_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("-k", type=int, default=3, help="order of the flat point [3]")
    p.add_argument("--p", type=float, default=1.2, help="Lebesgue exponent p [1.2]")
    p.add_argument("--epsilon", type=float, default=0.05, help="s-support width [0.05]")
    p.add_argument("--delta", type=float, default=0.1, help="t-support width [0.1]")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description="Weighted cone restriction laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("weight-audit", help="homogeneity / Euler / sign / circle normalisation")
    _common(p)
    p.add_argument("--points", type=int, default=1000)

    p = sub.add_parser("curvature-check", help="κ = w/|∇φ|^{n+1} residual sweep")
    _common(p)
    p.add_argument("--points", type=int, default=256)

    p = sub.add_parser("affine-check", help="random-X covariance suite")
    _common(p)
    p.add_argument("--count", type=int, default=100)

    p = sub.add_parser("coarea-check", help="plane vs co-area integrals")
    _common(p)
    p.add_argument("--t-min", type=float, default=0.5)
    p.add_argument("--t-max", type=float, default=2.0)

    p = sub.add_parser("slice-check", help="direct vs sliced extension operator")
    _common(p)
    p.add_argument("--points", type=int, default=20)

    p = sub.add_parser("sublevel", help="dyadic sublevel histogram of w and slope fit")
    _common(p)
    p.add_argument("--nodes", type=int, default=2 ** 20)

    p = sub.add_parser("knapp-scan", help="Knapp ratio slope against δ")
    _common(p)
    p.add_argument("--p", type=float, default=1.2)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--profile", choices=("gaussian", "bump"), default="gaussian")
    p.add_argument("--q-grid", type=float, nargs="+", default=None,
                   help="scan the slope over q and locate its zero crossing")

    p = sub.add_parser("exponents", help="ρ/τ identities, dyadic optimisation, weak norm")
    _common(p)

    p = sub.add_parser("sogge", help="J lower bound and divergence of the partial masses")
    _common(p)
    _sogge_flags(p)
    p.add_argument("--u-max", type=float, nargs="+", default=[1e4, 1e5, 1e6])
    p.add_argument("--R", type=float, default=1e3)

    p = sub.add_parser("oscillatory", help="g(α, s) sweep and stationary-phase fit")
    _common(p)
    _sogge_flags(p)
    p.add_argument("--alphas", type=int, default=7, help="points of the geometric α grid")
    p.add_argument("--s", type=float, nargs="+", default=[1.0, 1.1, 1.2])

    p = sub.add_parser("report", help="aggregate pass/fail summary")
    _common(p)
    p.add_argument("--full", action="store_true", help="include knapp-scan, oscillatory and sogge")
    return ap


LOG_FORMAT = "[%(levelname)s] %(message)s"


def setup_logging() -> None:
    logging.addLevelName(logging.WARNING, "WARN")
    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)


def main(argv: list[str] | None = None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args, DEFAULT_GAUGES.get(args.command, "circle"))
    except ConfigError as exc:
        logger.error("config: %s", exc)
        return EXIT_CONFIG

    t0 = time.perf_counter()
    try:
        report = SUBCOMMANDS[args.command](cfg, args)
    except (ConfigError, *DOMAIN_ERRORS) as exc:
        logger.error("%s: %s", args.command, exc)
        return EXIT_CONFIG
    logger.info("[TIME] %s %.3f", args.command, time.perf_counter() - t0)

    out = cfg.out if cfg.out is not None else f"outs/{args.command}.{cfg.fmt}"
    text = write_report(report, cfg.to_dict(), out, cfg.fmt)
    if out == "-":
        sys.stdout.write(text)
    else:
        logger.info("%s report written → %s", args.command, out)
    verdict = {0: "PASS", 1: "FAIL", 2: "UNCONVERGED"}[report.exit_code]
    logger.info("%s: %s (max residual %.3e)", args.command, verdict, report.max_residual)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
