"""BD-rate tables, curve exports and static SVG plots."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .bd import RQCurve, RQPoint, bd_rate, curves_from_csv, curves_to_csv
from .errors import ConfigurationError, CurveError
from .serial import dumps, fmt_float

# --- BD tables --------------------------------------------------------------


@dataclass
class BdTable:
    rows: list
    sequences: list
    cells: dict
    method: str = "cubic-fit"
    footnotes: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def value(self, metric, workflow, sequence):
        return self.cells.get((metric, workflow, sequence))

    def average(self, metric, workflow):
        vals = [v for s in self.sequences if (v := self.value(metric, workflow, s)) is not None]
        return math.fsum(vals) / len(vals) if vals else None

    def to_text(self, decimals=2) -> str:
        head = ["Metric", "Method"] + list(self.sequences) + ["Avg"]
        body = []
        for metric, wf in self.rows:
            line = [metric, wf]
            for s in self.sequences:
                v = self.value(metric, wf, s)
                mark = self.notes.get((metric, wf, s))
                line.append(f"[{mark}]" if v is None else f"{v:.{decimals}f}")
            avg = self.average(metric, wf)
            line.append("" if avg is None else f"{avg:.{decimals}f}")
            body.append(line)
        widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]

        def fmt(r):
            return "  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))).rstrip()

        out = [f"BD-rate (%) vs anchor, {self.method}; negative = bitrate saving", fmt(head),
               "  ".join("-" * w for w in widths)]
        out += [fmt(r) for r in body]
        out += [f"[{i + 1}] {n}" for i, n in enumerate(self.footnotes)]
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "workflow"] + list(self.sequences) + ["avg"])
        for metric, wf in self.rows:
            vals = [self.value(metric, wf, s) for s in self.sequences] + [self.average(metric, wf)]
            w.writerow([metric, wf] + ["" if v is None else fmt_float(v) for v in vals])
        return buf.getvalue()

    def to_dict(self):
        return {
            "method": self.method,
            "sequences": list(self.sequences),
            "rows": [
                {"metric": m, "workflow": wf,
                 "cells": {s: self.value(m, wf, s) for s in self.sequences},
                 "avg": self.average(m, wf)}
                for m, wf in self.rows
            ],
            "footnotes": list(self.footnotes),
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())


def bd_table(results, metrics=None, workflows=None, method="cubic-fit", allow_three=False) -> BdTable:
    """BD-rate of every non-anchor workflow against the anchor, per sequence.

    ``results`` is a :class:`ResultSet` or a list of curves whose ``label`` is
    the workflow. Cells whose BD computation fails stay blank with a footnote.
    """
    skipped = []
    if hasattr(results, "curves"):
        curves = results.curves(skipped=skipped)
        sequences = list(results.sequences)
        metrics = list(metrics or results.metrics)
        workflows = list(workflows or results.workflows)
    else:
        curves = list(results)
        sequences = list(dict.fromkeys(c.sequence for c in curves))
        metrics = list(metrics or dict.fromkeys(c.metric_id for c in curves))
        workflows = list(workflows or dict.fromkeys(c.label for c in curves))
    if not any(c.label == "anchor" for c in curves) and not skipped:
        raise CurveError("no anchor curves: BD table needs the anchor workflow")
    index = {(c.sequence, c.label, c.metric_id): c for c in curves}
    table = BdTable([(m, wf) for m in metrics for wf in workflows if wf != "anchor"], sequences, {}, method)

    def note(key, text):
        table.footnotes.append(text)
        table.notes[key] = len(table.footnotes)

    for metric, wf in table.rows:
        for s in sequences:
            key = (metric, wf, s)
            a, t = index.get((s, "anchor", metric)), index.get((s, wf, metric))
            if a is None or t is None:
                which = "anchor" if a is None else wf
                note(key, f"{s} {metric} {wf}: no usable {which} curve")
                continue
            try:
                table.cells[key] = bd_rate(a, t, method, allow_three).bd_rate_pct
            except CurveError as e:
                note(key, f"{s} {metric} {wf}: {e}")
    table.footnotes += [f"skipped curve {s}" for s in skipped]
    return table


# --- curve export -----------------------------------------------------------

def _curves_of(results):
    curves = results.curves() if hasattr(results, "curves") else list(results)
    if not curves:
        raise ConfigurationError("no curves to export")
    return curves


def export_curves(results, fmt="csv") -> str:
    """One row per (sequence, workflow, metric, rate point); CSV or JSON."""
    curves = _curves_of(results)
    if fmt == "csv":
        return curves_to_csv(curves)
    if fmt == "json":
        return dumps([{"sequence": c.sequence, "label": c.label, "metric": c.metric_id,
                       "points": [[p.rate, p.quality] for p in c.points]} for c in curves])
    raise ConfigurationError(f"unknown curve format {fmt!r}")


def import_curves(text, fmt="csv") -> list:
    if fmt == "csv":
        return curves_from_csv(text)
    if fmt == "json":
        return [RQCurve(d["label"], d["metric"], [RQPoint(float(r), float(q)) for r, q in d["points"]],
                        d.get("sequence", "")) for d in json.loads(text)]
    raise ConfigurationError(f"unknown curve format {fmt!r}")


# --- SVG --------------------------------------------------------------------

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
           "#bcbd22", "#17becf")


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    return [round(start + i * step, 12) for i in range(int((hi - start) / step + 1e-9) + 1)]


def _log_ticks(lo, hi):
    """Ticks at 1, 2, 5 times powers of ten inside ``[10**lo, 10**hi]``."""
    out = []
    for e in range(math.floor(lo), math.ceil(hi) + 1):
        for m in (1, 2, 5):
            v = m * 10.0 ** e
            if lo - 1e-12 <= math.log10(v) <= hi + 1e-12:
                out.append(v)
    return out


def _num(v):
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _label(v):
    return f"{v:g}"


class _Canvas:
    def __init__(self, width, height, xr, yr, log_x, margin=(60, 20, 30, 50)):
        self.width, self.height = width, height
        self.left, self.right, self.top, self.bottom = margin
        self.xr, self.yr, self.log_x = xr, yr, log_x

    def tx(self, x):
        if self.log_x:
            x = math.log10(x)
        lo, hi = self.xr
        return self.left + (x - lo) / (hi - lo) * (self.width - self.left - self.right)

    def ty(self, y):
        lo, hi = self.yr
        return self.height - self.bottom - (y - lo) / (hi - lo) * (self.height - self.top - self.bottom)


def _padded(lo, hi, frac=0.05):
    if hi == lo:
        d = abs(lo) * 0.05 or 1.0
        return lo - d, hi + d
    d = (hi - lo) * frac
    return lo - d, hi + d


def _chart(series, title, xlabel, ylabel, log_x, width, height, x0=0):
    """series: list of (label, xs, ys, color, stroke_width, markers)."""
    xs = np.concatenate([np.asarray(s[1], dtype=np.float64) for s in series])
    ys = np.concatenate([np.asarray(s[2], dtype=np.float64) for s in series])
    if log_x and (xs <= 0).any():
        raise ConfigurationError("log rate axis needs positive x values")
    xmin, xmax = float(xs.min()), float(xs.max())
    ymin, ymax = float(ys.min()), float(ys.max())
    xr = _padded(math.log10(xmin), math.log10(xmax)) if log_x else _padded(xmin, xmax)
    yr = _padded(ymin, ymax)
    c = _Canvas(width, height, xr, yr, log_x)
    c.left += x0
    bx0, bx1 = c.left, width - c.right
    by0, by1 = c.top, height - c.bottom
    axis_lo = 10 ** xr[0] if log_x else xr[0]
    axis_hi = 10 ** xr[1] if log_x else xr[1]
    g = [f'<g class="chart" data-xmin="{fmt_float(axis_lo)}" data-xmax="{fmt_float(axis_hi)}" '
         f'data-ymin="{fmt_float(yr[0])}" data-ymax="{fmt_float(yr[1])}" '
         f'data-xscale="{"log" if log_x else "linear"}">']
    g.append(f'<rect x="{_num(bx0)}" y="{_num(by0)}" width="{_num(bx1 - bx0)}" height="{_num(by1 - by0)}" '
             'fill="none" stroke="#000"/>')
    xticks = _log_ticks(*xr) if log_x else _nice_ticks(*xr)
    for v in xticks:
        px = c.tx(v)
        g.append(f'<line x1="{_num(px)}" y1="{_num(by1)}" x2="{_num(px)}" y2="{_num(by1 + 4)}" stroke="#000"/>')
        g.append(f'<text x="{_num(px)}" y="{_num(by1 + 16)}" font-size="10" text-anchor="middle">{_label(v)}</text>')
    for v in _nice_ticks(*yr):
        py = c.ty(v)
        g.append(f'<line x1="{_num(bx0 - 4)}" y1="{_num(py)}" x2="{_num(bx0)}" y2="{_num(py)}" stroke="#000"/>')
        g.append(f'<text x="{_num(bx0 - 6)}" y="{_num(py + 3)}" font-size="10" text-anchor="end">{_label(v)}</text>')
    g.append(f'<text x="{_num((bx0 + bx1) / 2)}" y="{_num(height - 8)}" font-size="12" '
             f'text-anchor="middle">{escape(xlabel)}</text>')
    g.append(f'<text x="{_num(bx0 - 45)}" y="{_num((by0 + by1) / 2)}" font-size="12" text-anchor="middle" '
             f'transform="rotate(-90 {_num(bx0 - 45)} {_num((by0 + by1) / 2)})">{escape(ylabel)}</text>')
    if title:
        g.append(f'<text x="{_num((bx0 + bx1) / 2)}" y="14" font-size="13" text-anchor="middle">{escape(title)}</text>')
    legend = []
    for i, (label, sx, sy, color, sw, markers) in enumerate(series):
        pts = [(c.tx(x), c.ty(y)) for x, y in zip(sx, sy)]
        if len(pts) >= 2:
            coords = " ".join(f"{_num(px)},{_num(py)}" for px, py in pts)
            g.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="{sw}"/>')
        if markers or len(pts) == 1:
            for px, py in pts:
                g.append(f'<circle cx="{_num(px)}" cy="{_num(py)}" r="3" fill="{color}"/>')
        if label:
            ly = by0 + 12 + 14 * len(legend)
            legend.append(f'<line x1="{_num(bx1 - 110)}" y1="{_num(ly - 4)}" x2="{_num(bx1 - 92)}" y2="{_num(ly - 4)}" '
                          f'stroke="{color}" stroke-width="2"/>'
                          f'<text x="{_num(bx1 - 88)}" y="{_num(ly)}" font-size="10">{escape(label)}</text>')
    g.append('<g class="legend">' + "".join(legend) + "</g>")
    g.append("</g>")
    return g


def _svg(width, height, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n<rect width="100%" height="100%" fill="#fff"/>\n'
            + "\n".join(body) + "\n</svg>\n")


def plot_svg(curves, title="", xlabel="Bitrate (kbps)", ylabel=None, log_x=True, width=640, height=420,
             label=None) -> str:
    """Rate-quality chart: one polyline and point markers per curve.

    ``label`` maps a curve to its legend text (default: the curve label).
    """
    curves = list(curves)
    if not curves or any(len(c) == 0 for c in curves):
        raise ConfigurationError("plot needs at least one nonempty curve")
    ylabel = ylabel if ylabel is not None else ", ".join(dict.fromkeys(c.metric_id for c in curves))
    series = [((label or (lambda c: c.label))(c), c.rates, c.qualities, PALETTE[i % len(PALETTE)], 1.5, True)
              for i, c in enumerate(curves)]
    return _svg(width, height, _chart(series, title, xlabel, ylabel, log_x, width, height))


def plot_profile_svg(profile, geometry=None, title="Temporal noise at probe points",
                     width=900, height=420) -> str:
    """Probe map on the left; raw (thin) and smoothed (thick) intensity series
    per probe on the right. ``geometry`` is ``(width, height)`` of the frame."""
    if not profile.probes:
        raise ConfigurationError("profile has no probes")
    fw, fh = geometry or (max(p.x for p in profile.probes) + 1, max(p.y for p in profile.probes) + 1)
    map_w = 240
    scale = min((map_w - 40) / fw, (height - 80) / fh)
    body = [f'<g class="probe-map"><rect x="20" y="40" width="{_num(fw * scale)}" height="{_num(fh * scale)}" '
            'fill="#222" stroke="#000"/>']
    for i, p in enumerate(profile.probes):
        color = PALETTE[i % len(PALETTE)]
        cx, cy = 20 + (p.x + 0.5) * scale, 40 + (p.y + 0.5) * scale
        body.append(f'<circle cx="{_num(cx)}" cy="{_num(cy)}" r="4" fill="{color}"/>'
                    f'<text x="{_num(cx + 5)}" y="{_num(cy - 5)}" font-size="9" fill="#fff">{escape(p.name(i))}</text>')
    body.append("</g>")
    series = []
    for i, p in enumerate(profile.probes):
        color = PALETTE[i % len(PALETTE)]
        t = np.arange(len(profile.series[i]))
        series.append(("", t, profile.series[i], color, 0.6, False))
        series.append((f"{p.name(i)} MAE {profile.mae[i] * 1e3:.3f}e-3", t, profile.smoothed[i], color, 2, False))
    body += _chart(series, title, "Frame", "Normalized intensity", False, width, height, x0=map_w)
    return _svg(width, height, body)
