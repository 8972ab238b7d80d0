"""Standalone log-log SVG plots of study CSV files."""

import math
from xml.sax.saxutils import escape

from . import errors
from .exceptions import ConfigError

KINDS = ("error_vs_H", "error_vs_dofs")
_COLOURS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]


def _series(records, kind, metric):
    groups = {}
    for r in records:
        x = r.H if kind == "error_vs_H" else r.active_dofs
        groups.setdefault((r.k, r.tau_hat), []).append((float(x), float(getattr(r, metric))))
    return {key: sorted(v) for key, v in sorted(groups.items())}


def _ticks(lo, hi):
    return [10.0 ** e for e in range(math.floor(lo), math.ceil(hi) + 1)]


def render(records, kind="error_vs_H", metric="e1", width=640, height=480):
    if kind not in KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; expected one of {KINDS}")
    if metric not in ("e0", "e1"):
        raise ConfigError("metric must be e0 or e1")
    series = _series(records, kind, metric)
    pts = [p for s in series.values() for p in s if p[0] > 0 and p[1] > 0]
    if not pts:
        raise ConfigError("nothing to plot")
    lx = [math.log10(p[0]) for p in pts]
    ly = [math.log10(p[1]) for p in pts]
    x0, x1 = min(lx) - 0.1, max(lx) + 0.1
    y0, y1 = min(ly) - 0.2, max(ly) + 0.2
    ml, mr, mt, mb = 70, 150, 20, 50
    pw, ph = width - ml - mr, height - mt - mb

    def X(v):
        return ml + (math.log10(v) - x0) / (x1 - x0) * pw

    def Y(v):
        return mt + (y1 - math.log10(v)) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           'font-family="sans-serif" font-size="11">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="white" stroke="black"/>']
    for t in _ticks(x0, x1):
        if x0 <= math.log10(t) <= x1:
            out.append(f'<line x1="{X(t):.1f}" y1="{mt}" x2="{X(t):.1f}" y2="{mt + ph}" stroke="#ddd"/>')
            out.append(f'<text x="{X(t):.1f}" y="{mt + ph + 15}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        if y0 <= math.log10(t) <= y1:
            out.append(f'<line x1="{ml}" y1="{Y(t):.1f}" x2="{ml + pw}" y2="{Y(t):.1f}" stroke="#ddd"/>')
            out.append(f'<text x="{ml - 5}" y="{Y(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
    xlabel = "H" if kind == "error_vs_H" else "active DOFs"
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="15" y="{mt + ph / 2}" transform="rotate(-90 15 {mt + ph / 2})" '
               f'text-anchor="middle">{metric}</text>')
    for i, ((k, tau), s) in enumerate(series.items()):
        colour = _COLOURS[i % len(_COLOURS)]
        label = f"k={k}, tau={tau:g}"
        if len(s) >= 2:
            slope = errors.fit_slope(s)
            label += f" ({slope:.2f})"
            path = " ".join(f"{X(x):.1f},{Y(y):.1f}" for x, y in s)
            out.append(f'<polyline points="{path}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        for x, y in s:
            out.append(f'<circle cx="{X(x):.1f}" cy="{Y(y):.1f}" r="3" fill="{colour}"/>')
        ly_ = mt + 15 + 16 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly_ - 4}" x2="{ml + pw + 30}" y2="{ly_ - 4}" '
                   f'stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 34}" y="{ly_}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out)


def plot_svg(csv_path, kind, out_path, metric="e1"):
    records = errors.read_csv(csv_path)
    svg = render(records, kind, metric)
    with open(out_path, "w") as fh:
        fh.write(svg)
    return out_path
