"""Plain SVG figures: success probability against horizon, and mean samples per algorithm.

Written by hand to keep plotting free of extra dependencies. Each data mark
carries ``data-*`` attributes with the plotted values so the files can be
checked programmatically.
"""

import math
import os
from xml.sax.saxutils import quoteattr, escape

import numpy as np

from ..errors import BadParam, EmptySelection
from .outputs import summarize, summary_key

WIDTH, HEIGHT = 720, 440
LEFT, RIGHT, TOP, BOTTOM = 80, 190, 40, 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
           "#bcbd22", "#17becf")
KINDS = ("success_vs_horizon", "samples_bar")


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        if v >= lo - 1e-9 * step:
            ticks.append(v)
        v += step
    return ticks, step


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.3g}"
    return f"{v:g}"


class _Canvas:
    def __init__(self, title, xlabel, ylabel):
        self.parts = []
        self.pw = WIDTH - LEFT - RIGHT
        self.ph = HEIGHT - TOP - BOTTOM
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel

    def add(self, s):
        self.parts.append(s)

    def axes(self, xticks, xmap, yticks, ymap, xlabels=None):
        a = self.add
        a(f'<rect x="{LEFT}" y="{TOP}" width="{self.pw}" height="{self.ph}" fill="none" stroke="#333"/>')
        for t in yticks:
            y = ymap(t)
            a(f'<line x1="{LEFT - 5}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="#333"/>')
            a(f'<line x1="{LEFT}" y1="{y:.2f}" x2="{LEFT + self.pw}" y2="{y:.2f}" stroke="#ddd"/>')
            a(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="11">{_fmt(t)}</text>')
        for i, t in enumerate(xticks):
            x = xmap(t)
            label = xlabels[i] if xlabels else _fmt(t)
            a(f'<line x1="{x:.2f}" y1="{TOP + self.ph}" x2="{x:.2f}" y2="{TOP + self.ph + 5}" stroke="#333"/>')
            a(f'<text x="{x:.2f}" y="{TOP + self.ph + 18}" text-anchor="middle" font-size="11">'
              f'{escape(label)}</text>')
        a(f'<text x="{LEFT + self.pw / 2}" y="{HEIGHT - 15}" text-anchor="middle" font-size="13">'
          f'{escape(self.xlabel)}</text>')
        a(f'<text x="20" y="{TOP + self.ph / 2}" text-anchor="middle" font-size="13" '
          f'transform="rotate(-90 20 {TOP + self.ph / 2})">{escape(self.ylabel)}</text>')
        a(f'<text x="{LEFT + self.pw / 2}" y="{TOP - 15}" text-anchor="middle" font-size="15">'
          f'{escape(self.title)}</text>')

    def legend(self, entries):
        x0 = LEFT + self.pw + 15
        self.add('<g class="legend">')
        for i, (label, color, dashed) in enumerate(entries):
            y = TOP + 10 + 20 * i
            dash = ' stroke-dasharray="6 4"' if dashed else ""
            self.add(f'<line x1="{x0}" y1="{y}" x2="{x0 + 24}" y2="{y}" stroke="{color}" stroke-width="3"{dash}/>')
            self.add(f'<text x="{x0 + 30}" y="{y + 4}" font-size="11">{escape(label)}</text>')
        self.add("</g>")

    def svg(self, kind):
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
                f'viewBox="0 0 {WIDTH} {HEIGHT}" data-kind="{kind}">\n'
                f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n')
        return head + "\n".join(self.parts) + "\n</svg>\n"


def success_vs_horizon_svg(table, max_points=200):
    """Fraction of trials recommending the best arm after each step.

    UCB rows contribute curves from their per-step traces; every other
    algorithm is drawn as a dashed level at its success rate at termination.
    """
    multi = len({r.instance_id for r in table.rows}) > 1
    curves = {}
    for row, c in zip(table.rows, table.curves):
        if c is not None:
            curves.setdefault(summary_key(row, multi), []).append(np.asarray(c, dtype=bool))
    if not curves:
        raise EmptySelection("success_vs_horizon needs at least one UCB run with a per-step trace")
    summary = summarize(table)
    levels = {k: v["success_rate"] for k, v in summary.items() if k not in curves}
    horizon = max(len(c) for cs in curves.values() for c in cs)
    canvas = _Canvas("Probability of identifying the best arm", "time step", "success frequency")
    xticks, _ = _nice_ticks(0, horizon)
    xmap = lambda t: LEFT + canvas.pw * t / horizon
    ymap = lambda v: TOP + canvas.ph * (1 - v)
    canvas.axes(xticks, xmap, [0, 0.2, 0.4, 0.6, 0.8, 1.0], ymap)
    entries = []
    for i, (label, cs) in enumerate(sorted(curves.items())):
        color = PALETTE[i % len(PALETTE)]
        length = min(len(c) for c in cs)
        freq = np.mean([c[:length] for c in cs], axis=0)
        idx = np.unique(np.linspace(0, length - 1, min(max_points, length)).round().astype(int))
        pts = " ".join(f"{xmap(t + 1):.2f},{ymap(freq[t]):.2f}" for t in idx)
        canvas.add(f'<g class="series" data-label={quoteattr(label)} data-final="{freq[-1]!r}">'
                   f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/></g>')
        entries.append((label, color, False))
    for j, (label, rate) in enumerate(sorted(levels.items()), start=len(entries)):
        color = PALETTE[j % len(PALETTE)]
        y = ymap(rate)
        canvas.add(f'<g class="series" data-label={quoteattr(label)} data-final="{rate!r}">'
                   f'<line x1="{LEFT}" y1="{y:.2f}" x2="{LEFT + canvas.pw}" y2="{y:.2f}" stroke="{color}" '
                   f'stroke-width="2" stroke-dasharray="6 4"/></g>')
        entries.append((f"{label} (at termination)", color, True))
    canvas.legend(entries)
    return canvas.svg("success_vs_horizon")


def samples_bar_svg(table):
    """Mean total samples per algorithm with one-standard-deviation whiskers."""
    summary = {k: v for k, v in summarize(table).items()
               if not any(k.startswith(u) for u in ("ucb_ols", "ucb_iv"))}
    if not summary:
        raise EmptySelection("samples_bar needs at least one non-UCB algorithm")
    labels = list(summary)
    top = max(v["mean_samples"] + v["std_samples"] for v in summary.values())
    yticks, _ = _nice_ticks(0, top if top > 0 else 1.0)
    ymax = yticks[-1] if yticks[-1] >= top else top
    canvas = _Canvas("Sample complexity", "algorithm", "samples until termination")
    scale = canvas.ph / ymax
    slot = canvas.pw / len(labels)
    xmap = lambda i: LEFT + slot * (i + 0.5)
    ymap = lambda v: TOP + canvas.ph - v * scale
    canvas.axes(range(len(labels)), xmap, yticks, ymap, xlabels=labels)
    canvas.add(f'<g class="bars" data-scale="{scale!r}" data-baseline="{TOP + canvas.ph}">')
    entries = []
    for i, label in enumerate(labels):
        color = PALETTE[i % len(PALETTE)]
        m, s = summary[label]["mean_samples"], summary[label]["std_samples"]
        h = m * scale
        x = xmap(i) - slot * 0.3
        canvas.add(f'<g class="series" data-label={quoteattr(label)}>'
                   f'<rect class="bar" x="{x:.2f}" y="{ymap(m):.6f}" width="{slot * 0.6:.2f}" height="{h:.6f}" '
                   f'fill="{color}" data-mean="{m!r}" data-std="{s!r}"/>'
                   f'<line x1="{xmap(i):.2f}" y1="{ymap(max(m - s, 0)):.2f}" x2="{xmap(i):.2f}" '
                   f'y2="{ymap(m + s):.2f}" stroke="#000" stroke-width="1.5"/></g>')
        entries.append((label, color, False))
    canvas.add("</g>")
    canvas.legend(entries)
    return canvas.svg("samples_bar")


def emit_plots(table, out_dir, kinds=KINDS, skip_empty=False):
    """Write ``<kind>.svg`` for each requested kind; returns the written paths.

    Raises :class:`EmptySelection` when a kind has nothing to draw, unless
    ``skip_empty`` is set.
    """
    if not table.rows:
        raise EmptySelection("no rows to plot")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for kind in kinds:
        if kind not in KINDS:
            raise BadParam(f"unknown plot kind {kind!r}; choose from {KINDS}")
        try:
            svg = success_vs_horizon_svg(table) if kind == "success_vs_horizon" else samples_bar_svg(table)
        except EmptySelection:
            if skip_empty:
                continue
            raise
        path = os.path.join(out_dir, f"{kind}.svg")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(svg)
        paths.append(path)
    return paths
