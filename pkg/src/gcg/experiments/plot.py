"""Static SVG learning curves (distance vs. environment steps) with a CSV sidecar."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from gcg.errors import ConfigError
from gcg.experiments.sweep import moving_average

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"]
WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=60, right=150, top=30, bottom=45)


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None


def _read(path: Path) -> tuple[list[str], list[dict]]:
    if not path.exists():
        raise ConfigError(f"{path} not found")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        return list(reader.fieldnames or []), rows


def _y_column(header: list[str], path: Path) -> str:
    for col in ("mean", "distance_m"):
        if col in header:
            return col
    raise ConfigError(f"{path}: no 'mean' or 'distance_m' column to plot")


def load_series(paths, smoothing: int = 1) -> list[Series]:
    """Read CSVs sharing one schema; schema differences name the offending column."""
    paths = [Path(p) for p in paths]
    series: list[Series] = []
    ref_header = None
    for p in paths:
        header, rows = _read(p)
        if "step" not in header:
            raise ConfigError(f"{p}: missing column 'step'")
        if ref_header is None:
            ref_header = header
        elif header != ref_header:
            extra = [c for c in header if c not in ref_header]
            missing = [c for c in ref_header if c not in header]
            col = (extra or missing or [c for c, r in zip(header, ref_header) if c != r])[0]
            raise ConfigError(f"{p}: column {col!r} does not match the schema of {paths[0]}")
        ycol = _y_column(header, p)
        rows = [r for r in rows if r[ycol] != ""]
        x = np.array([float(r["step"]) for r in rows])
        y = moving_average([float(r[ycol]) for r in rows], smoothing)
        lo = hi = None
        if "min" in header and "max" in header:
            lo = moving_average([float(r["min"]) for r in rows], smoothing)
            hi = moving_average([float(r["max"]) for r in rows], smoothing)
        label = p.parent.name if p.stem in ("aggregate", "metrics") else p.stem
        series.append(Series(label, x, y, lo, hi))
    return series


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (np.asarray(v, dtype=np.float64) - lo) / span * (b - a)


def _fmt(v: float) -> str:
    return f"{v:.1f}"


def render_svg(series: list[Series], title: str = "", xlabel: str = "steps", ylabel: str = "distance (m)") -> str:
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    xs = [s.x for s in series if s.x.size]
    ys = [v for s in series if s.y.size for v in (s.y, s.lo, s.hi) if v is not None]
    xmin, xmax = (min(a.min() for a in xs), max(a.max() for a in xs)) if xs else (0.0, 1.0)
    ymax = max(a.max() for a in ys) if ys else 1.0
    ymin = min(0.0, min(a.min() for a in ys)) if ys else 0.0
    sx, sy = _scale(xmin, xmax, x0, x1), _scale(ymin, ymax, y0, y1)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if title:
        out.append(f'<text x="{(x0 + x1) / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<g class="axes" stroke="black"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>'
               f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>')
    for t in np.linspace(xmin, xmax, 5):
        px = float(sx(t))
        out.append(f'<text x="{_fmt(px)}" y="{y0 + 15}" text-anchor="middle">{t:g}</text>')
    for t in np.linspace(ymin, ymax, 5):
        py = float(sy(t))
        out.append(f'<text x="{x0 - 5}" y="{_fmt(py + 4)}" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{(y0 + y1) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 15 {(y0 + y1) / 2})">{escape(ylabel)}</text>')

    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        if s.x.size and s.lo is not None:
            upper = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(sx(s.x), sy(s.hi)))
            lower = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(sx(s.x[::-1]), sy(s.lo[::-1])))
            out.append(f'<polygon class="band" points="{upper} {lower}" fill="{color}" fill-opacity="0.2" '
                       f'stroke="none"/>')
        if s.x.size:
            pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(sx(s.x), sy(s.y)))
            out.append(f'<polyline class="curve" data-label="{escape(s.label)}" points="{pts}" fill="none" '
                       f'stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN["top"] + 16 * i
        out.append(f'<g class="legend-entry"><line x1="{x1 + 10}" y1="{ly}" x2="{x1 + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/><text x="{x1 + 35}" y="{ly + 4}">{escape(s.label)}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot(csvs, out, smoothing: int = 1, title: str = "") -> Path:
    """Write ``out`` (SVG) and ``out`` with a .csv suffix holding the plotted series."""
    series = load_series(csvs, smoothing)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_svg(series, title))
    with open(out.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "step", "value", "min", "max"])
        for s in series:
            for j in range(s.x.size):
                lo = "" if s.lo is None else repr(float(s.lo[j]))
                hi = "" if s.hi is None else repr(float(s.hi[j]))
                w.writerow([s.label, repr(float(s.x[j])), repr(float(s.y[j])), lo, hi])
    return out
