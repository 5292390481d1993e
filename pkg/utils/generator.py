#!/usr/bin/env python3
"""generator.py: seeded random test objects for the weight / gauge experiments

Produces either a random smooth convex radial gauge (JSON gauge description,
loadable with ``--gauge path.json``) or a batch of random linear maps with
entries in [-2, 2] and |det X| >= 0.1.

Output format:
    gauge : {"kind": "radial", "params": {"cos": [...], "sin": [...]}, "label": ...}
    maps  : {"dimension": n, "matrices": [[[...]...], ...]}

CLI arguments
-------------
--kind        "gauge" or "maps"                      [default "gauge"]
--modes/-m    Fourier modes of r(θ) (gauge)          [default 4]
--amplitude   Largest coefficient size (gauge)       [default 0.08]
--count/-c    Number of matrices (maps)              [default 100]
--dimension   Matrix size n (maps)                   [default 2]
--out         Output path ("-" → stdout)             [default "-"]
--seed        RNG seed (int).  If omitted, uses a millisecond monotonic
              timestamp so each run differs.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from utils.gauge import Gauge, GaugeError, GaugeSpec, radial_spec

DET_FLOOR = 0.1
MAX_ATTEMPTS = 1000


def random_linear_maps(rng: np.random.Generator, count: int, n: int) -> list[np.ndarray]:
    """Matrices with i.i.d. entries in [-2, 2], resampled until |det| >= 0.1."""
    out = []
    while len(out) < count:
        X = rng.uniform(-2.0, 2.0, size=(n, n))
        if abs(np.linalg.det(X)) >= DET_FLOOR:
            out.append(X)
    return out


def random_unit_vectors(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    v = rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_radial_spec(rng: np.random.Generator, modes: int = 4,
                       amplitude: float = 0.08) -> GaugeSpec:
    """Smooth convex radial gauge r(θ) = 1 + Σ (a_m cos mθ + b_m sin mθ)."""
    for attempt in range(MAX_ATTEMPTS):
        decay = amplitude / np.arange(1, modes + 1) ** 2
        a = rng.uniform(-1.0, 1.0, modes) * decay
        b = rng.uniform(-1.0, 1.0, modes) * decay
        spec = radial_spec([1.0, *a.tolist()], b.tolist(), label=f"radial(m={modes})")
        try:
            Gauge(spec)
        except GaugeError:
            continue
        return spec
    raise GaugeError(f"no convex radial gauge after {MAX_ATTEMPTS} draws; lower --amplitude")


def choose_seed(seed: int | None) -> int:
    """Return a concrete seed value (ms precision)"""
    if seed is not None:
        return seed
    return time.perf_counter_ns() // 1_000_000


def parse_args() -> argparse.Namespace:
    p = argparse.ArgumentParser(description="Random gauge / linear-map generator")
    p.add_argument("--kind", choices=("gauge", "maps"), default="gauge")
    p.add_argument("--modes", "-m", type=int, default=4, help="Fourier modes of r(theta)")
    p.add_argument("--amplitude", type=float, default=0.08, help="Largest coefficient size")
    p.add_argument("--count", "-c", type=int, default=100, help="Number of matrices")
    p.add_argument("--dimension", type=int, default=2, help="Matrix size n")
    p.add_argument("--out", type=str, default="-", help="Output file (default: stdout)")
    p.add_argument("--seed", type=int, default=None, help="Random seed (default: monotonic clock ms)")
    args = p.parse_args()
    if args.modes < 1:
        p.error("--modes must be >= 1")
    if not 2 <= args.dimension <= 4:
        p.error("--dimension must be 2, 3 or 4")
    return args


def main() -> None:
    args = parse_args()
    seed = choose_seed(args.seed)
    rng = np.random.default_rng(seed)

    if args.kind == "gauge":
        payload = random_radial_spec(rng, args.modes, args.amplitude).to_dict()
    else:
        maps = random_linear_maps(rng, args.count, args.dimension)
        payload = {"dimension": args.dimension, "matrices": [X.tolist() for X in maps]}
    payload["seed"] = seed
    text = json.dumps(payload, indent=2) + "\n"

    if args.out == "-":
        sys.stdout.write(text)
    else:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text, encoding="utf-8")
        print(f"[INFO] {args.kind} written → {out_path}  (seed={seed})")


if __name__ == "__main__":
    main()
