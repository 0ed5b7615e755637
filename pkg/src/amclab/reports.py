"""Machine-readable report emission: CSV grids, JSON with full provenance,
and hand-rolled SVG line plots (byte-deterministic for identical reports)."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from amclab.harness import ExperimentReport

_SVG_W, _SVG_H = 640, 420
_MARGIN = 50
_PALETTE = ("#1b6ca8", "#d1495b", "#3a7d44", "#8a4fff", "#e8871e",
            "#00798c", "#7d5ba6", "#665191")


def emit_report(report: ExperimentReport, out_dir: str | Path,
                formats=("csv", "json", "svg"), stem: str | None = None
                ) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or report.kind
    written = []
    if "csv" in formats:
        written.append(_write_csv(report, out_dir / f"{stem}.csv"))
    if "json" in formats:
        written.append(_write_json(report, out_dir / f"{stem}.json"))
    if "svg" in formats:
        written.append(_write_svg(report, out_dir / f"{stem}.svg"))
    return written


def _cell_columns(report: ExperimentReport) -> list[str]:
    cols = []
    for cell in report.cells:
        for key in cell:
            if key != "confusion" and key not in cols:
                cols.append(key)
    return cols


def _write_csv(report: ExperimentReport, path: Path) -> Path:
    cols = _cell_columns(report)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(cols)
        for cell in report.cells:
            writer.writerow([cell.get(c, "") for c in cols])
    return path


def _write_json(report: ExperimentReport, path: Path) -> Path:
    payload = {
        "kind": report.kind,
        "pnr_grid": report.pnr_grid,
        "cells": report.cells,
        "provenance": report.provenance,
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")
    return path


def load_report(path: str | Path) -> ExperimentReport:
    with open(path) as f:
        payload = json.load(f)
    return ExperimentReport(
        kind=payload["kind"],
        pnr_grid=payload["pnr_grid"],
        cells=payload["cells"],
        provenance=payload["provenance"],
    )


def _curves(report: ExperimentReport) -> dict[str, list[tuple[float, float]]]:
    """Group cells into (label, [(pnr, accuracy), ...]) curves; the curve key
    is every cell field except the PNR, the accuracy, and diagnostics."""
    skip = {"pnr_db", "accuracy", "confusion", "degenerate_count",
            "measured_pnr_db"}
    curves: dict[str, list[tuple[float, float]]] = {}
    for cell in report.cells:
        label = " ".join(str(cell[k]) for k in cell if k not in skip)
        curves.setdefault(label, []).append((cell["pnr_db"], cell["accuracy"]))
    for pts in curves.values():
        pts.sort()
    return curves


def _write_svg(report: ExperimentReport, path: Path) -> Path:
    curves = _curves(report)
    pnrs = report.pnr_grid
    x_lo, x_hi = (min(pnrs), max(pnrs)) if pnrs else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    plot_w = _SVG_W - 2 * _MARGIN
    plot_h = _SVG_H - 2 * _MARGIN

    def sx(p):
        return _MARGIN + (p - x_lo) / (x_hi - x_lo) * plot_w

    def sy(a):
        return _MARGIN + (1.0 - a) * plot_h

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" '
        f'height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<text x="{_SVG_W // 2}" y="20" text-anchor="middle" '
        f'font-size="14">{report.kind}</text>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN + plot_h}" '
        f'x2="{_MARGIN + plot_w}" y2="{_MARGIN + plot_h}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" '
        f'y2="{_MARGIN + plot_h}" stroke="black"/>',
        f'<text x="{_SVG_W // 2}" y="{_SVG_H - 8}" text-anchor="middle" '
        f'font-size="12">PNR [dB]</text>',
    ]
    for p in pnrs:
        lines.append(
            f'<text x="{sx(p):.2f}" y="{_MARGIN + plot_h + 16}" '
            f'text-anchor="middle" font-size="9">{p:g}</text>')
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        lines.append(
            f'<text x="{_MARGIN - 6}" y="{sy(tick):.2f}" '
            f'text-anchor="end" font-size="9">{tick:g}</text>')
    for i, (label, pts) in enumerate(sorted(curves.items())):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{sx(p):.2f},{sy(a):.2f}" for p, a in pts)
        lines.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{coords}"><title>{label}</title></polyline>')
        lines.append(
            f'<text x="{_MARGIN + plot_w + 4}" y="{_MARGIN + 12 * (i + 1)}" '
            f'font-size="9" fill="{color}">{label[:18]}</text>')
    lines.append("</svg>")
    path.write_text("\n".join(lines) + "\n")
    return path
