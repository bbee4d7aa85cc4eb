"""Minimal hand-written SVG output for disk pictures.

Coordinates are disk coordinates; the canvas maps the unit disk to a
fixed square with the y axis pointing up.  Numbers are printed with a
fixed precision so that identical inputs give identical files.
"""

from __future__ import annotations

import json
from xml.sax.saxutils import escape

import numpy as np

from .hypgeo import _as_complex, geodesic_points

SIZE = 600
RADIUS = 280.0
COLORS = {"A": "#c0392b", "B": "#2471a3", "chord": "#7f8c8d"}


def _xy(z) -> tuple:
    z = complex(z)
    return SIZE / 2 + RADIUS * z.real, SIZE / 2 - RADIUS * z.imag


def _pts(z) -> str:
    return " ".join("%.3f,%.3f" % _xy(w) for w in np.atleast_1d(z))


class Svg:
    """Accumulates SVG elements; ``to_string`` embeds ``config`` as JSON metadata."""

    def __init__(self, title: str, config: dict | None = None):
        self.title = title
        self.config = config or {}
        self.items = []
        self.circle(0j, 1.0, stroke="#000000", width=1.0)

    def circle(self, c, r: float, stroke="#000000", width=1.0, fill="none"):
        x, y = _xy(c)
        self.items.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{RADIUS * r:.3f}" '
                          f'stroke="{stroke}" stroke-width="{width:g}" fill="{fill}"/>')

    def polyline(self, z, stroke="#000000", width=1.0, closed=False, fill="none"):
        tag = "polygon" if closed else "polyline"
        self.items.append(f'<{tag} points="{_pts(z)}" stroke="{stroke}" '
                          f'stroke-width="{width:g}" fill="{fill}"/>')

    def dots(self, z, r: float = 1.5, fill="#000000"):
        for w in np.atleast_1d(z):
            x, y = _xy(w)
            self.items.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{r:g}" fill="{fill}"/>')

    def text(self, z, s: str, size: int = 12):
        x, y = _xy(z)
        self.items.append(f'<text x="{x:.3f}" y="{y:.3f}" font-size="{size}" '
                          f'font-family="sans-serif">{escape(s)}</text>')

    def geodesic(self, a, b, stroke="#000000", width=1.0, samples: int = 96):
        za, zb = _as_complex(a), _as_complex(b)
        pts = np.concatenate([[za], geodesic_points(za, zb, np.linspace(-9.0, 9.0, samples)), [zb]])
        self.polyline(pts, stroke, width)

    def to_string(self) -> str:
        meta = escape(json.dumps(self.config, sort_keys=True))
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
                f'viewBox="0 0 {SIZE} {SIZE}">')
        body = "\n".join(self.items)
        return (f'{head}\n<title>{escape(self.title)}</title>\n<metadata>{meta}</metadata>\n'
                f'<rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>\n{body}\n</svg>\n')

    def save(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_string())


def polygon_picture(G, title: str, config: dict | None = None, svg: Svg | None = None,
                    width: float = 1.5) -> Svg:
    """Sides of an ideal polygon coloured by label."""
    svg = svg or Svg(title, config)
    n = G.n
    for i in range(n):
        svg.geodesic(G.vertices[i], G.vertices[(i + 1) % n], COLORS[G.label(i)], width)
    return svg


def domain_picture(dom, title: str, config: dict | None = None, mesh=None) -> Svg:
    svg = Svg(title, config)
    if mesh is not None:
        z = mesh.z
        for t in mesh.triangles:
            svg.polyline(z[t], stroke="#d5d8dc", width=0.3, closed=True)
    polygon_picture(dom.parent, title, svg=svg, width=0.8)
    for arc in dom.arcs:
        s = np.linspace(0.0, arc.length, 48)
        svg.polyline(arc.points(s), COLORS[arc.kind], 2.0)
    return svg


def contour_segments(mesh, u: np.ndarray, level: float) -> list:
    """Segments of the level set ``u = level`` of a P1 function, one per crossed triangle."""
    z = mesh.z
    out = []
    for tri in mesh.triangles:
        f = u[tri] - level
        pts = []
        for a in range(3):
            i, j = a, (a + 1) % 3
            if (f[i] < 0) != (f[j] < 0):
                t = f[i] / (f[i] - f[j])
                pts.append(z[tri[i]] + t * (z[tri[j]] - z[tri[i]]))
        if len(pts) == 2:
            out.append(pts)
    return out


def level_set_picture(sol, levels, title: str, config: dict | None = None) -> Svg:
    dom = sol.mesh.domain
    svg = domain_picture(dom, title, config) if dom is not None else Svg(title, config)
    lo, hi = min(levels), max(levels)
    for lv in levels:
        s = 0.0 if hi == lo else (lv - lo) / (hi - lo)
        color = "#%02x%02x%02x" % (int(40 + 200 * s), 60, int(240 - 200 * s))
        for seg in contour_segments(sol.mesh, sol.u, lv):
            svg.polyline(np.array(seg), color, 0.8)
    return svg
