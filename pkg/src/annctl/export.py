"""CSV and SVG output. CSV is authoritative; plots are best-effort."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.write_text(csv_text(header, rows), newline="")
    return path


def write_columns(path: str | Path, columns: Mapping[str, np.ndarray], every: int = 1) -> Path:
    """Columns of equal length, keeping every ``every``-th row plus the last one."""
    arrays = [np.asarray(c) for c in columns.values()]
    n = len(arrays[0])
    idx = list(range(0, n, every))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return write_csv(path, list(columns), ([a[i] for a in arrays] for i in idx))


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def svg_plot(x: np.ndarray, series: Mapping[str, np.ndarray], title: str = "", xlabel: str = "t [s]",
             width: int = 640, height: int = 360, max_points: int = 2000) -> str:
    """A plain line chart with axes, four ticks per axis and a legend."""
    x = np.asarray(x, dtype=float)
    stride = max(1, len(x) // max_points)
    xs = x[::stride]
    ys = {k: np.asarray(v, dtype=float)[::stride] for k, v in series.items()}
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()] + [np.zeros(1)])
    y_lo, y_hi = float(finite.min()), float(finite.max())
    if y_hi - y_lo < 1e-12:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    x_lo, x_hi = float(xs[0]), float(xs[-1]) if xs[-1] > xs[0] else float(xs[0]) + 1.0
    left, right, top, bottom = 60, 20, 30, 40
    pw, ph = width - left - right, height - top - bottom

    def px(v):
        return left + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return top + (y_hi - v) / (y_hi - y_lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="white" stroke="black"/>']
    for i in range(5):
        xv = x_lo + i * (x_hi - x_lo) / 4
        yv = y_lo + i * (y_hi - y_lo) / 4
        out.append(f'<text x="{px(xv):.1f}" y="{height - bottom + 15}" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{left - 5}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 5}" text-anchor="middle">{xlabel}</text>')
    if title:
        out.append(f'<text x="{left + pw / 2}" y="18" text-anchor="middle" font-size="13">{title}</text>')
    for j, (name, v) in enumerate(ys.items()):
        color = COLORS[j % len(COLORS)]
        ok = np.isfinite(v)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs[ok], v[ok]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = top + 14 + 14 * j
        out.append(f'<line x1="{left + pw - 90}" y1="{ly - 4}" x2="{left + pw - 70}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw - 65}" y="{ly}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path: str | Path, x, series, title: str = "") -> Path:
    path = Path(path)
    path.write_text(svg_plot(x, series, title))
    return path
