"""
Golden-file comparison of CSV outputs.

Numeric cells pass when ``|a - b| <= tol * max(|a|, |b|) + atol``; text
cells (headers) must match exactly. Every CSV in the golden directory must
have a counterpart in the fresh directory, and vice versa; both directories
must hold a run manifest.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_TOL = 1e-9
# intensities that should be exactly zero come out at ~1e-30 in float64
DEFAULT_ATOL = 1e-12


@dataclass
class FileReport:
    name: str
    ok: bool
    message: str = ""


@dataclass
class RegressionReport:
    files: list[FileReport] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return bool(self.files) and all(f.ok for f in self.files)

    def summary(self) -> str:
        lines = [f"note {n}" for n in self.notes]
        lines += [f"{'ok  ' if f.ok else 'FAIL'} {f.name}" + (f": {f.message}" if f.message else "")
                 for f in self.files]
        if not self.files:
            lines.append("FAIL no CSV files found in the golden directory")
        return "\n".join(lines)


def _read(path: Path) -> list[list[str]]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def _number(cell: str):
    try:
        return float(cell)
    except ValueError:
        return None


def compare_csv(golden: Path, fresh: Path, tol: float = DEFAULT_TOL, atol: float = DEFAULT_ATOL) -> FileReport:
    """Cell-wise comparison; reports the first divergent cell."""
    name = golden.name
    a, b = _read(golden), _read(fresh)
    if len(a) != len(b):
        return FileReport(name, False, f"row count {len(b)} != golden {len(a)}")
    for r, (row_a, row_b) in enumerate(zip(a, b)):
        if len(row_a) != len(row_b):
            return FileReport(name, False, f"row {r}: {len(row_b)} columns != golden {len(row_a)}")
        for c, (x, y) in enumerate(zip(row_a, row_b)):
            fx, fy = _number(x), _number(y)
            if fx is None or fy is None:
                if x != y:
                    return FileReport(name, False, f"row {r} col {c}: {y!r} != golden {x!r}")
                continue
            if fx != fy and not abs(fx - fy) <= tol * max(abs(fx), abs(fy)) + atol:
                rel = abs(fx - fy) / max(abs(fx), abs(fy))
                return FileReport(name, False,
                                  f"row {r} col {c} ({row_a and a[0][c]}): {fy!r} vs golden {fx!r} "
                                  f"(rel {rel:.3e} > {tol:g})")
    return FileReport(name, True)


def regression_check(golden_dir, fresh_dir, tol: float = DEFAULT_TOL, atol: float = DEFAULT_ATOL) -> RegressionReport:
    """Compare every CSV in ``golden_dir`` against ``fresh_dir``."""
    golden_dir, fresh_dir = Path(golden_dir), Path(fresh_dir)
    if not golden_dir.is_dir():
        raise FileNotFoundError(f"golden directory {golden_dir} does not exist")
    if not fresh_dir.is_dir():
        raise FileNotFoundError(f"fresh directory {fresh_dir} does not exist")
    report = RegressionReport()
    manifests = []
    for d in (golden_dir, fresh_dir):
        path = d / "manifest.json"
        if not path.is_file():
            raise FileNotFoundError(f"{d} has no manifest.json")
        manifests.append(json.loads(path.read_text(encoding="utf-8")))
    if manifests[0].get("config_hash") != manifests[1].get("config_hash"):
        # not fatal by itself: the cell comparison shows where the outputs diverge
        report.notes.append("config hashes differ between golden and fresh runs")
    golden = {p.name: p for p in sorted(golden_dir.glob("*.csv"))}
    fresh = {p.name: p for p in sorted(fresh_dir.glob("*.csv"))}
    for name, path in golden.items():
        if name not in fresh:
            report.files.append(FileReport(name, False, "missing from fresh output"))
        else:
            report.files.append(compare_csv(path, fresh[name], tol, atol))
    for name in sorted(set(fresh) - set(golden)):
        report.files.append(FileReport(name, False, "no golden counterpart"))
    return report
