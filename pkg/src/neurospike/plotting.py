"""Minimal deterministic SVG time-series plots.

Written by hand instead of through a plotting library so the output is
byte-stable across runs and every spike marker is a distinct element that
tests can count.
"""
from __future__ import annotations

from html import escape
from pathlib import Path

import numpy as np

W, H = 900, 360
ML, MR, MT, MB = 70, 20, 30, 45


class _Axes:
    def __init__(self, t0, t1, y0, y1):
        if y1 <= y0:
            y0, y1 = y0 - 1.0, y1 + 1.0
        self.t0, self.t1, self.y0, self.y1 = t0, t1 if t1 > t0 else t0 + 1.0, y0, y1

    def px(self, t):
        return ML + (np.asarray(t) - self.t0) / (self.t1 - self.t0) * (W - ML - MR)

    def py(self, y):
        return MT + (self.y1 - np.asarray(y)) / (self.y1 - self.y0) * (H - MT - MB)


def _frame(ax: _Axes, title: str, ylabel: str) -> list:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" fill="none" stroke="black"/>',
    ]
    for t in np.linspace(ax.t0, ax.t1, 6):
        x = ax.px(t)
        out.append(f'<text x="{x:.2f}" y="{H - MB + 16}" text-anchor="middle" font-size="11">{t:.3g}</text>')
    for y in np.linspace(ax.y0, ax.y1, 5):
        yy = ax.py(y)
        out.append(f'<text x="{ML - 6}" y="{yy + 4:.2f}" text-anchor="end" font-size="11">{y:.3g}</text>')
    if ax.y0 < 0 < ax.y1:
        z = ax.py(0.0)
        out.append(f'<line x1="{ML}" y1="{z:.2f}" x2="{W - MR}" y2="{z:.2f}" stroke="#bbb" stroke-dasharray="4 3"/>')
    out.append(f'<text x="{W / 2}" y="{H - 8}" text-anchor="middle" font-size="12">t [s]</text>')
    out.append(f'<text x="14" y="{H / 2}" font-size="12" transform="rotate(-90 14 {H / 2})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    return out


def _legend(out, labels_colors):
    for k, (label, color) in enumerate(labels_colors):
        y = MT + 14 + 16 * k
        out.append(f'<line x1="{W - MR - 150}" y1="{y}" x2="{W - MR - 130}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - MR - 125}" y="{y + 4}" font-size="11">{escape(label)}</text>')


def state_plot(path, series, title="State x", ylabel="x"):
    """``series`` is a list of ``(label, trace, color)``; plots ``x`` against ``t`` per arc."""
    t1 = max(float(tr.t[-1]) for _, tr, _ in series)
    ys = np.concatenate([tr.x[:, 0] for _, tr, _ in series])
    ax = _Axes(0.0, t1, float(ys.min()), float(ys.max()))
    out = _frame(ax, title, ylabel)
    for label, tr, color in series:
        for arc in tr.arcs():
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(ax.px(arc.t), ax.py(arc.q[:, 0])))
            out.append(f'<polyline class="arc" data-series="{escape(label)}" data-j="{arc.j}" points="{pts}" '
                       f'fill="none" stroke="{color}" stroke-width="1.2"/>')
    _legend(out, [(label, color) for label, _, color in series])
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
    return Path(path)


def input_plot(path, series, title="Spiking input u", ylabel="u"):
    """``series`` is a list of ``(label, trace, neurons, color)``.

    One stem per jump record: ``-alpha1`` when neuron 1 fires, ``+alpha2``
    for neuron 2.
    """
    t1 = max(float(tr.t[-1]) for _, tr, _, _ in series)
    amp = max(max(n.alpha1, n.alpha2) for _, _, n, _ in series)
    ax = _Axes(0.0, t1, -1.15 * amp, 1.15 * amp)
    out = _frame(ax, title, ylabel)
    z = ax.py(0.0)
    for label, tr, neurons, color in series:
        for k, jr in enumerate(tr.jumps):
            u = -neurons.alpha1 if jr.active_guard == 1 else neurons.alpha2
            x = ax.px(jr.t)
            out.append(f'<line class="spike" data-series="{escape(label)}" data-k="{k}" data-t="{jr.t!r}" '
                       f'data-guard="{jr.active_guard}" x1="{x:.2f}" y1="{z:.2f}" x2="{x:.2f}" '
                       f'y2="{ax.py(u):.2f}" stroke="{color}" stroke-width="1"/>')
    _legend(out, [(label, color) for label, _, _, color in series])
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
    return Path(path)
