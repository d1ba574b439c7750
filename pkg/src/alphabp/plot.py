"""Minimal deterministic SVG line charts for the experiment CSVs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

__all__ = ["SCHEMAS", "SchemaError", "Series", "read_series", "render_svg", "plot_csv"]

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 20, 50
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


class SchemaError(ValueError):
    """CSV header matches no known schema."""


# name -> (required columns, x column, y columns, series key columns)
SCHEMAS = {
    "sweep": (("gamma", "alpha", "sigma", "mean_lambda"), "sigma", ("mean_lambda",), ("gamma", "alpha")),
    "trajectory": (("iteration", "min_error", "mean_error", "max_error"), "iteration",
                   ("min_error", "mean_error", "max_error"), ()),
    "ser": (("snr_db", "algorithm", "ser"), "snr_db", ("ser",), ("algorithm",)),
    "xy": (("x", "y"), "x", ("y",), ("series",)),
}


@dataclass(frozen=True)
class Series:
    key: str
    points: tuple[tuple[float, float], ...]


def _fmt(v: float) -> str:
    return format(v, ".12g")


def _detect(header) -> str:
    cols = set(header)
    for name, (required, *_rest) in SCHEMAS.items():
        if set(required) <= cols:
            return name
    expected = "; ".join(f"{n}: {','.join(r)}" for n, (r, *_x) in SCHEMAS.items())
    raise SchemaError(f"unrecognized columns {','.join(header)}; expected one of {expected}")


def read_series(text: str) -> tuple[str, list[Series]]:
    """Parse a CSV (``#`` comment lines skipped) into named series, in first-seen order."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise SchemaError("empty CSV")
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    schema = _detect(reader.fieldnames or [])
    _, xcol, ycols, keycols = SCHEMAS[schema]
    groups: dict[str, list[tuple[float, float]]] = {}
    for row in reader:
        x = float(row[xcol])
        for ycol in ycols:
            parts = [f"{k}={row[k]}" for k in keycols if row.get(k) not in (None, "")]
            if len(ycols) > 1:
                parts.append(ycol)
            key = " ".join(parts) or ycol
            groups.setdefault(key, []).append((x, float(row[ycol])))
    return schema, [Series(k, tuple(v)) for k, v in groups.items()]


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def render_svg(series: list[Series], logy: bool = False, title: str = "") -> str:
    """One polyline per series plus axes, ticks and a legend. Nonpositive y is dropped on log axes."""
    data = []
    for s in series:
        pts = [(x, y) for x, y in s.points if math.isfinite(x) and math.isfinite(y) and (y > 0 or not logy)]
        if logy:
            pts = [(x, math.log10(y)) for x, y in pts]
        data.append((s.key, pts))
    xs = [x for _, p in data for x, _ in p] or [0.0, 1.0]
    ys = [y for _, p in data for _, y in p] or [0.0, 1.0]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def py(y):
        return TOP + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<title>{escape(title)}</title>')
    base_y, right_x = TOP + ph, LEFT + pw
    out.append(f'<line class="axis" x1="{LEFT}" y1="{base_y}" x2="{right_x}" y2="{base_y}" stroke="black"/>')
    out.append(f'<line class="axis" x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{base_y}" stroke="black"/>')
    for t in _ticks(x0, x1):
        out.append(f'<text class="xtick" x="{_fmt(round(px(t), 3))}" y="{base_y + 15}" '
                   f'text-anchor="middle">{format(t, ".4g")}</text>')
    for t in _ticks(y0, y1):
        label = "1e" + format(t, ".3g") if logy else format(t, ".4g")
        out.append(f'<text class="ytick" x="{LEFT - 5}" y="{_fmt(round(py(t), 3))}" '
                   f'text-anchor="end">{label}</text>')
    for i, (key, pts) in enumerate(data):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_fmt(round(px(x), 6))},{_fmt(round(py(y), 6))}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'data-series="{escape(key, {chr(34): "&quot;"})}" points="{coords}"/>')
        ly = TOP + 12 + 16 * i
        out.append(f'<line x1="{right_x + 10}" y1="{ly - 4}" x2="{right_x + 30}" y2="{ly - 4}" stroke="{color}"/>')
        out.append(f'<text class="legend" x="{right_x + 35}" y="{ly}">{escape(key)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_csv(text: str, logy: bool = False) -> str:
    schema, series = read_series(text)
    return render_svg(series, logy=logy, title=schema)
