"""Deterministic SVG and CSV renderings of planar point sets, matchings and shift plans."""

from __future__ import annotations

import csv
import io
import math

import numpy as np

from .geometry import FinitePointSet, Lattice, PeriodicPointSet, points_in_ball
from .transport import lattice_points_in_ball

MARGIN = 1.0
SCALE = 20.0


def window_points(x, window: float) -> np.ndarray:
    """Points of ``x`` in the box [-window, window]^d, sorted lexicographically."""
    if isinstance(x, Lattice):
        x = PeriodicPointSet.from_lattice(x)
    if isinstance(x, FinitePointSet):
        pts = np.array(x.points)
    else:
        pts = np.array(points_in_ball(x, np.zeros(x.dim), window * math.sqrt(x.dim)).points)
    inside = np.all(np.abs(pts) <= window + 1e-9, axis=1)
    pts = pts[inside]
    return pts[np.lexsort(pts.T[::-1])] if len(pts) else pts


def format_number(v: float) -> str:
    s = f"{v:.4f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class SvgCanvas:
    def __init__(self, window: float):
        self.window = window
        self.size = 2 * (window + MARGIN) * SCALE
        self.items: list[str] = []

    def _xy(self, p) -> tuple[str, str]:
        # flip y so that the picture has the usual orientation
        return (format_number((p[0] + self.window + MARGIN) * SCALE),
                format_number((self.window + MARGIN - p[1]) * SCALE))

    def dots(self, pts, color: str, radius: float = 2.5, layer: str = "points"):
        self.items.append(f'<g id="{layer}" fill="{color}">')
        for p in pts:
            x, y = self._xy(p)
            self.items.append(f'<circle cx="{x}" cy="{y}" r="{format_number(radius)}"/>')
        self.items.append("</g>")

    def segments(self, pairs, color: str, layer: str, arrow: bool = False):
        extra = ' marker-end="url(#head)"' if arrow else ""
        self.items.append(f'<g id="{layer}" stroke="{color}" stroke-width="1"{extra}>')
        for a, b in pairs:
            (x1, y1), (x2, y2) = self._xy(a), self._xy(b)
            self.items.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}"/>')
        self.items.append("</g>")

    def render(self) -> str:
        size = format_number(self.size)
        head = ('<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" '
                'orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="context-stroke"/></marker></defs>')
        return "\n".join([f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
                          f'viewBox="0 0 {size} {size}">', head, *self.items, "</svg>"]) + "\n"


def _require_planar(d: int):
    if d != 2:
        raise ValueError(f"SVG export needs a planar point set, got dimension {d}")


def svg_points(x, window: float, other=None) -> str:
    pts = window_points(x, window)
    _require_planar(pts.shape[1] if len(pts) else x.dim)
    canvas = SvgCanvas(window)
    canvas.dots(pts, "black", layer="X")
    if other is not None:
        canvas.dots(window_points(other, window), "red", layer="Y")
    return canvas.render()


def svg_matching(x_points: np.ndarray, y_points: np.ndarray, pairs, window: float) -> str:
    """One segment per matched pair (i, j) between finite point arrays."""
    _require_planar(x_points.shape[1])
    canvas = SvgCanvas(window)
    canvas.dots(x_points, "black", layer="X")
    canvas.dots(y_points, "red", layer="Y")
    canvas.segments([(x_points[i], y_points[j]) for i, j in pairs], "gray", "matching")
    return canvas.render()


def plan_arrows(plan, window: float) -> list[list[tuple[np.ndarray, np.ndarray]]]:
    """Per-step displacement arrows for the source lattice points inside the window."""
    pts = lattice_points_in_ball(plan.source, window * math.sqrt(len(plan.source)))
    pts = pts[np.all(np.abs(pts) <= window + 1e-9, axis=1)]
    pts = pts[np.lexsort(pts.T[::-1])]
    layers = []
    for step in plan.steps:
        moved = step.apply(pts)
        layers.append([(a, b) for a, b in zip(pts, moved) if np.linalg.norm(b - a) > 1e-12])
        pts = moved
    return layers


def svg_plan(plan, window: float) -> str:
    _require_planar(len(plan.source))
    canvas = SvgCanvas(window)
    layers = plan_arrows(plan, window)
    palette = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"]
    for k, arrows in enumerate(layers):
        canvas.segments(arrows, palette[k % len(palette)], f"step{k + 1}", arrow=True)
    target = window_points(PeriodicPointSet.from_lattice(Lattice(plan.target)), window)
    canvas.dots(target, "black", radius=1.5, layer="target")
    return canvas.render()


def csv_points(x, window: float) -> str:
    pts = window_points(x, window)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{i + 1}" for i in range(pts.shape[1] if len(pts) else x.dim)])
    for p in pts:
        writer.writerow([format_number(v) for v in p])
    return buf.getvalue()


def csv_pairs(pairs) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["i", "j"])
    writer.writerows(list(pairs))
    return buf.getvalue()
