#!/usr/bin/env python3
"""benchmark.py: multi‑round timing and determinism runs for the conelab subcommands.

Workflow per round
------------------
1. **Seed** the round (``--seed`` or a millisecond monotonic timestamp).
2. **Run** every requested subcommand of ``main.py`` once per worker count,
   each as a *subprocess* writing its report to a predictable path
   (template supports ``%t`` = timestamp, ``{run}``, ``{cmd}``, ``{workers}``).
3. **Compare** the report bytes across worker counts; any difference is a
   determinism failure.
4. **Parse** the ``[TIME] <subcommand> X.XXX`` lines from the driver's log and
   keep a running total per (subcommand, workers).
After *N* rounds, print the average runtime per subcommand and worker count.

Usage example
-------------
```bash
python benchmark.py \
    --commands weight-audit affine-check slice-check \
    --workers 1 2 4 --runs 3 \
    --gauge superellipse \
    --out-template outs/bench_%t_run{run}_{cmd}_w{workers}.csv
```
"""
from __future__ import annotations

import argparse
import re
import subprocess
import sys
import time
from datetime import datetime
from pathlib import Path
from typing import Dict, Tuple

TIME_RE = re.compile(r"\[TIME] (\S+) ([\d.]+)")

# ---------------------------------------------------------------------------
# Helper functions
# ---------------------------------------------------------------------------

def build_cmd(args: argparse.Namespace, command: str, workers: int, seed: int,
              run_id: int) -> tuple[list[str], Path]:
    ts = datetime.now().strftime("%Y%m%d_%H%M%S")
    out_path = (args.out_template.replace("%t", ts).replace("{run}", str(run_id))
                .replace("{cmd}", command).replace("{workers}", str(workers)))
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    cmd = [
        sys.executable,
        args.driver,
        command,
        "--seed", str(seed),
        "--workers", str(workers),
        "--out", str(out_path),
    ]
    if args.gauge:
        cmd += ["--gauge", args.gauge]
    return cmd, out_path


def parse_time_lines(log: str, workers: int, totals: Dict[Tuple[str, int], float]) -> None:
    for line in log.splitlines():
        m = TIME_RE.search(line)
        if m:
            key = (m.group(1), workers)
            totals[key] = totals.get(key, 0.0) + float(m.group(2))


def choose_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    return time.perf_counter_ns() // 1_000_000

# ---------------------------------------------------------------------------
# Main routine
# ---------------------------------------------------------------------------

def main() -> int:
    ap = argparse.ArgumentParser("Benchmark conelab subcommands across worker counts")
    ap.add_argument("-r", "--runs", type=int, default=3, help="#rounds (default 3)")
    ap.add_argument("--commands", nargs="+", default=["weight-audit", "affine-check", "coarea-check"],
                    help="subcommands of the driver to run")
    ap.add_argument("--workers", type=int, nargs="+", default=[1, 2], help="worker counts to compare")
    ap.add_argument("--gauge", default=None, help="forwarded to every subcommand")
    ap.add_argument("--driver", default="main.py", help="driver script")
    ap.add_argument("--out-template", default="outs/bench_%t_run{run}_{cmd}_w{workers}.csv",
                    help="report path template (%t = time, {run}, {cmd}, {workers})")
    ap.add_argument("--seed", type=int, help="fixed RNG seed (optional)")
    args = ap.parse_args()

    totals: Dict[Tuple[str, int], float] = {}
    mismatches = 0

    for run in range(1, args.runs + 1):
        print(f"\n=== Round {run}/{args.runs} ===")
        seed = choose_seed(args.seed)

        for command in args.commands:
            outputs: Dict[int, bytes] = {}
            for workers in args.workers:
                cmd, report_path = build_cmd(args, command, workers, seed, run)
                t0 = time.perf_counter()
                proc = subprocess.run(cmd, capture_output=True, text=True)
                print(f"[INFO] {command} (workers={workers}) 用时 {time.perf_counter() - t0:.3f} 秒 "
                      f"exit {proc.returncode} → {report_path}")
                if proc.returncode == 64:
                    print(proc.stderr, end="")
                    return 64
                parse_time_lines(proc.stderr, workers, totals)
                outputs[workers] = report_path.read_bytes()

            reference = outputs[args.workers[0]]
            for workers, data in outputs.items():
                if data != reference:
                    mismatches += 1
                    print(f"[WARN] {command}: workers={workers} output differs from "
                          f"workers={args.workers[0]} (seed={seed})")

    # ---------- summary ----------
    print("\n=========== 平均用时 ===========")
    for (tag, workers), total in sorted(totals.items()):
        print(f"{tag:<16} w={workers:<3}: {total / args.runs:.4f} 秒")
    print(f"[INFO] determinism mismatches: {mismatches}")
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
