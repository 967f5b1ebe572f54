"""Run-CSV reading, scaling summaries and a dependency-free SVG scatter plot."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from pathlib import Path
from statistics import median
from xml.sax.saxutils import escape

CSV_COLUMNS = ["n", "seed", "trial", "model", "phi", "rule", "steps", "final_h", "wall_time_ns", "terminated"]
CSV_VERSION = "fliplab-run-csv v1"


class CsvFormatError(ValueError):
    pass


def read_run_csv(path: str | Path) -> list[dict]:
    text = Path(path).read_text()
    body = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not body:
        raise CsvFormatError(f"{path}: no data")
    reader = csv.DictReader(io.StringIO("\n".join(body)))
    if reader.fieldnames != CSV_COLUMNS:
        raise CsvFormatError(f"{path}: expected columns {CSV_COLUMNS}, got {reader.fieldnames}")
    rows = []
    for k, r in enumerate(reader, 2):
        try:
            r["n"], r["steps"] = int(r["n"]), int(r["steps"])
        except (TypeError, ValueError) as e:
            raise CsvFormatError(f"{path}: bad row {k}: {e}") from None
        rows.append(r)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return rows


def median_steps(rows) -> dict[str, dict[int, float]]:
    """rule -> n -> median step count."""
    acc: dict[str, dict[int, list[int]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        acc[r["rule"]][int(r["n"])].append(int(r["steps"]))
    return {rule: {n: float(median(v)) for n, v in sorted(by_n.items())} for rule, by_n in sorted(acc.items())}


def loglog_slope(points: dict[int, float]) -> float | None:
    """Least-squares slope of log(median) against log(n); None with fewer than two usable points."""
    pts = [(math.log(n), math.log(m)) for n, m in points.items() if m > 0]
    if len(pts) < 2:
        return None
    mx = sum(x for x, _ in pts) / len(pts)
    my = sum(y for _, y in pts) / len(pts)
    sxx = sum((x - mx) ** 2 for x, _ in pts)
    if sxx == 0:
        return None
    return sum((x - mx) * (y - my) for x, y in pts) / sxx


def scaling_summary(rows) -> dict:
    med = median_steps(rows)
    return {rule: {"median_steps": {str(n): m for n, m in pts.items()}, "slope": loglog_slope(pts)}
            for rule, pts in med.items()}


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def render_svg(rows, title: str = "FLIP steps vs n", metadata: str = "") -> str:
    med = median_steps(rows)
    pts = [(n, m) for series in med.values() for n, m in series.items() if m > 0]
    if not pts:
        raise CsvFormatError("nothing to plot: no positive medians")
    W, H, L, R, T, B = 640, 440, 70, 20, 40, 60
    xs = [math.log10(n) for n, _ in pts]
    ys = [math.log10(m) for _, m in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(x):
        return L + (x - x0) / (x1 - x0) * (W - L - R)

    def py(y):
        return H - B - (y - y0) / (y1 - y0) * (H - T - B)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f"<metadata>{escape(metadata)}</metadata>",
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<line x1="{L}" y1="{H - B}" x2="{W - R}" y2="{H - B}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" stroke="black"/>',
        f'<text x="{(L + W - R) / 2}" y="{H - 15}" text-anchor="middle" font-family="sans-serif" font-size="12">log10 n</text>',
        f'<text x="18" y="{(T + H - B) / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 18 {(T + H - B) / 2})">log10 median steps</text>',
    ]
    for k, (lo, hi, horiz) in enumerate([(x0, x1, True), (y0, y1, False)]):
        for tick in (lo, (lo + hi) / 2, hi):
            if horiz:
                out.append(f'<text x="{px(tick):.1f}" y="{H - B + 16}" text-anchor="middle" '
                           f'font-family="sans-serif" font-size="10">{tick:.2f}</text>')
            else:
                out.append(f'<text x="{L - 6}" y="{py(tick) + 3:.1f}" text-anchor="end" '
                           f'font-family="sans-serif" font-size="10">{tick:.2f}</text>')
    for k, (rule, series) in enumerate(med.items()):
        color = _COLORS[k % len(_COLORS)]
        for n, m in series.items():
            if m > 0:
                out.append(f'<circle class="marker" data-rule="{escape(rule)}" data-n="{n}" data-median="{m}" '
                           f'cx="{px(math.log10(n)):.2f}" cy="{py(math.log10(m)):.2f}" r="4" fill="{color}"/>')
        slope = loglog_slope(series)
        label = f"{rule}: slope = {slope:.4f}" if slope is not None else f"{rule}: slope = n/a"
        out.append(f'<text class="slope" data-rule="{escape(rule)}" data-slope="{slope!r}" x="{L + 10}" '
                   f'y="{T + 16 + 16 * k}" font-family="sans-serif" font-size="12" fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
