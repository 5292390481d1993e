# report.py
"""Result tables shared by every subcommand and their CSV / JSON writers."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

FLOAT_FORMAT = ".17g"


@dataclass
class ScanReport:
    """Rows of one experiment plus the verdict drawn from them."""
    name: str
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    passed: bool = True
    unconverged: bool = False
    max_residual: float = 0.0
    extras: dict[str, Any] = field(default_factory=dict)

    def add(self, *row) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row of length {len(row)} for columns {self.columns}")
        self.rows.append(tuple(row))

    def check(self, ok: bool, residual: float | None = None) -> bool:
        """Fold one check into the verdict and the running max residual."""
        self.passed = self.passed and bool(ok)
        if residual is not None and math.isfinite(residual):
            self.max_residual = max(self.max_residual, float(residual))
        elif residual is not None:
            self.passed = False
        return bool(ok)

    def flag_unconverged(self, converged: bool) -> None:
        if not converged:
            self.unconverged = True

    @property
    def exit_code(self) -> int:
        if self.unconverged:
            return 2
        return 0 if self.passed else 1

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]


def format_cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, FLOAT_FORMAT)
    if isinstance(value, complex):
        return f"{format(value.real, FLOAT_FORMAT)}{format(value.imag, '+' + FLOAT_FORMAT)}j"
    if hasattr(value, "item"):
        return format_cell(value.item())
    return str(value)


def _plain(value: Any) -> Any:
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


def to_csv(report: ScanReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def to_json(report: ScanReport, config: dict[str, Any]) -> str:
    payload = {
        "subcommand": report.name,
        "config": _plain(config),
        "rows": [dict(zip(report.columns, _plain(list(row)))) for row in report.rows],
        "pass": report.passed and not report.unconverged,
        "max_residual": _plain(report.max_residual),
    }
    if report.extras:
        payload["summary"] = _plain(report.extras)
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"


def write_report(report: ScanReport, config: dict[str, Any], out: str | None,
                 fmt: str = "csv") -> str:
    """Render ``report`` and write it to ``out`` (``-`` or None: return only)."""
    text = to_json(report, config) if fmt == "json" else to_csv(report)
    if out and out != "-":
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return text


def summary_table(reports: Sequence[ScanReport]) -> ScanReport:
    table = ScanReport("report", ["subcommand", "pass", "unconverged", "max_residual"])
    for r in reports:
        table.add(r.name, r.passed, r.unconverged, r.max_residual)
        table.check(r.passed, r.max_residual)
        table.flag_unconverged(not r.unconverged)
    return table
