"""Standalone SVG figures: profile curves, component graphs and branch projections.

Every panel has a fixed viewBox, axes with end labels, and optionally the
unit half disk that bounds profile curves.  Output depends only on the
input arrays, so identical data gives identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PANEL_W = 380
PANEL_H = 300
LEFT, RIGHT, TOP, BOTTOM = 70, 15, 35, 40
COLORS = ("#1f4e99", "#b3261e", "#2e7d32", "#6a1b9a", "#ef6c00")


@dataclass
class Panel:
    title: str
    xlim: tuple
    ylim: tuple
    series: list = field(default_factory=list)  # (x, y, color)
    xlabel: str = ""
    ylabel: str = ""
    half_disk: bool = False
    equal_aspect: bool = False

    def add(self, x, y, color=None):
        color = color or COLORS[len(self.series) % len(COLORS)]
        self.series.append((np.asarray(x, dtype=float), np.asarray(y, dtype=float), color))
        return self


def _num(v: float) -> str:
    return f"{v:.6g}"


def _padded(lo, hi, frac=0.05):
    if not (np.isfinite(lo) and np.isfinite(hi)):
        return -1.0, 1.0
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = frac * (hi - lo)
    return lo - pad, hi + pad


def auto_limits(*arrays):
    vals = np.concatenate([np.ravel(a) for a in arrays])
    vals = vals[np.isfinite(vals)]
    if len(vals) == 0:
        return -1.0, 1.0
    return _padded(float(vals.min()), float(vals.max()))


def _panel_svg(panel: Panel, x0: float, y0: float) -> list:
    (xa, xb), (ya, yb) = panel.xlim, panel.ylim
    w = PANEL_W - LEFT - RIGHT
    h = PANEL_H - TOP - BOTTOM
    if panel.equal_aspect:
        scale = min(w / (xb - xa), h / (yb - ya))
        sx = sy = scale
    else:
        sx, sy = w / (xb - xa), h / (yb - ya)
    ox, oy = x0 + LEFT, y0 + TOP + h

    def px(x):
        return ox + (x - xa) * sx

    def py(y):
        return oy - (y - ya) * sy

    out = ['<g font-family="sans-serif" font-size="11">',
           f'<text x="{_num(x0 + PANEL_W / 2)}" y="{_num(y0 + 18)}" text-anchor="middle" '
           f'font-size="13">{panel.title}</text>']
    # axes box with end labels
    out.append(f'<rect x="{_num(ox)}" y="{_num(py(yb))}" width="{_num((xb - xa) * sx)}" '
               f'height="{_num((yb - ya) * sy)}" fill="none" stroke="#444" stroke-width="0.8"/>')
    out.append(f'<text x="{_num(ox)}" y="{_num(oy + 14)}" text-anchor="start">{_num(xa)}</text>')
    out.append(f'<text x="{_num(px(xb))}" y="{_num(oy + 14)}" text-anchor="end">{_num(xb)}</text>')
    out.append(f'<text x="{_num(ox - 4)}" y="{_num(oy)}" text-anchor="end">{_num(ya)}</text>')
    out.append(f'<text x="{_num(ox - 4)}" y="{_num(py(yb) + 10)}" text-anchor="end">{_num(yb)}</text>')
    if panel.xlabel:
        out.append(f'<text x="{_num((ox + px(xb)) / 2)}" y="{_num(oy + 26)}" '
                   f'text-anchor="middle">{panel.xlabel}</text>')
    if panel.ylabel:
        yc = (oy + py(yb)) / 2
        out.append(f'<text x="{_num(x0 + 14)}" y="{_num(yc)}" text-anchor="middle" '
                   f'transform="rotate(-90 {_num(x0 + 14)} {_num(yc)})">{panel.ylabel}</text>')
    if xa < 0 < xb:
        out.append(f'<line x1="{_num(px(0))}" y1="{_num(py(ya))}" x2="{_num(px(0))}" '
                   f'y2="{_num(py(yb))}" stroke="#bbb" stroke-width="0.5"/>')
    if ya < 0 < yb:
        out.append(f'<line x1="{_num(px(xa))}" y1="{_num(py(0))}" x2="{_num(px(xb))}" '
                   f'y2="{_num(py(0))}" stroke="#bbb" stroke-width="0.5"/>')
    if panel.half_disk:
        ang = np.linspace(0.0, math.pi, 181)
        pts = " ".join(f"{_num(px(math.cos(u)))},{_num(py(math.sin(u)))}" for u in ang)
        out.append(f'<polyline points="{pts} {_num(px(1.0))},{_num(py(0.0))}" fill="none" '
                   f'stroke="#999" stroke-dasharray="4 3" stroke-width="0.8"/>')
    for x, y, color in panel.series:
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{_num(px(a))},{_num(py(b))}" for a, b in zip(x[ok], y[ok]))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>')
    out.append("</g>")
    return out


def render(panels: list, title: str = "") -> str:
    """SVG document with the panels laid out in one row."""
    width = PANEL_W * len(panels)
    height = PANEL_H + (24 if title else 0)
    top = 24 if title else 0
    body = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
            f'width="{width}" height="{height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        body.append(f'<text x="{width / 2}" y="17" text-anchor="middle" font-family="sans-serif" '
                    f'font-size="14">{title}</text>')
    for k, panel in enumerate(panels):
        body.extend(_panel_svg(panel, k * PANEL_W, top))
    body.append("</svg>")
    return "\n".join(body) + "\n"


def profile_figure(table: np.ndarray, title: str = "") -> str:
    """Three panels from a ``(t, f1, f2, theta, f3)`` table: the profile in the
    half disk, f1 and f2 against t, and theta against t."""
    t, f1, f2, th = table[:, 0], table[:, 1], table[:, 2], table[:, 3]
    prof = Panel("profile", (-1.05, 1.05), (-0.05, 1.05), xlabel="f1", ylabel="f2",
                 half_disk=True, equal_aspect=True).add(f1, f2)
    comps = Panel("f1, f2", auto_limits(t), auto_limits(f1, f2), xlabel="t")
    comps.add(t, f1, COLORS[0]).add(t, f2, COLORS[1])
    ang = Panel("theta", auto_limits(t), auto_limits(th), xlabel="t").add(t, th)
    return render([prof, comps, ang], title)


def branch_figure(a: np.ndarray, H: np.ndarray, marks=None, title: str = "") -> str:
    """The branch projected to the (a, H) plane with optional marked points."""
    panel = Panel("branch (a, H)", auto_limits(a), auto_limits(H), xlabel="a", ylabel="H").add(a, H)
    if marks:
        mx = np.array([m[0] for m in marks])
        my = np.array([m[1] for m in marks])
        # short crosses drawn as separate tiny polylines
        dx = 0.01 * (panel.xlim[1] - panel.xlim[0])
        dy = 0.01 * (panel.ylim[1] - panel.ylim[0])
        for x, y in zip(mx, my):
            panel.add([x - dx, x + dx], [y, y], COLORS[1])
            panel.add([x, x], [y - dy, y + dy], COLORS[1])
    return render([panel], title)
