"""Truncated domains D(l) and their triangulations.

The truncated domain of an ideal polygon at level ``l`` is bounded by the
sides of the polygon cut off by horocycles of size ``s_i(0) 2^{-l}`` and by
the geodesic chords joining the two points where the horocycle at ``d_i``
meets the two sides through ``d_i``.

Markers
-------
Boundary nodes carry integer markers: ``1 + i`` for (the truncated part of)
side ``[d_i, d_{i+1}]`` and ``1 + n + i`` for the chord at vertex ``d_i``;
interior nodes carry ``0``.  Each marked arc owns its first node in the
clockwise boundary order, so an arc is its marked nodes plus the next
boundary node.

Mesh file format
----------------
Plain text, ``\\n`` line endings::

    scherk-mesh 1
    # <optional comment lines, e.g. the run configuration>
    <n_nodes> <n_triangles> <n_boundary>
    <x> <y> <marker>        (n_nodes lines, %.17g)
    <i> <j> <k>             (n_triangles lines, 0-based)

The first ``n_boundary`` nodes are the boundary in clockwise order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import triangle as tr

from .hypgeo import (GeometryError, Decoration, MoebiusMap, _as_complex, _geodesic_frame,
                     conformal_factor, distance_to_geodesic, hyperbolic_distance,
                     horocycle_geodesic_point)
from .polygon import ScherkPolygon

DEFAULT_H = 0.25
DEFAULT_GRADING = 2.0
MESH_MAGIC = "scherk-mesh 1"


class MeshError(GeometryError):
    pass


class DecorationOverlap(MeshError):
    pass


class MeshFailure(MeshError):
    pass


# ---------------------------------------------------------------------------
# geodesic segments between interior points


def segment_points(p: complex, q: complex, s) -> np.ndarray:
    """Points at hyperbolic distance ``s`` from ``p`` along the geodesic to ``q``."""
    t = MoebiusMap.to_origin(p)
    w = complex(t(q))
    u = w / abs(w)
    return np.asarray(t.inverse()(np.tanh(0.5 * np.asarray(s, dtype=float)) * u))


def line_endpoints(p: complex, q: complex) -> tuple:
    """Ideal endpoints of the full geodesic through interior points ``p``, ``q``."""
    t = MoebiusMap.to_origin(p)
    w = complex(t(q))
    u = w / abs(w)
    back = t.inverse()
    return complex(back(-u)), complex(back(u))


def signed_side(z, a: complex, b: complex, ref: complex) -> np.ndarray:
    """Hyperbolic distance from ``z`` to geodesic ``[a, b]``, positive on ``ref``'s side."""
    rot = _geodesic_frame(a, b)
    z = np.asarray(z, dtype=complex)
    w = rot * (z - a) / (z - b)
    wr = rot * (ref - a) / (ref - b)
    sign = 1.0 if wr.real > 0 else -1.0
    return sign * np.arcsinh(np.real(w) / np.imag(w))


@dataclass(frozen=True)
class Arc:
    marker: int
    kind: str  # "A", "B" or "chord"
    index: int
    start: complex
    end: complex

    @property
    def length(self) -> float:
        return hyperbolic_distance(self.start, self.end)

    def points(self, s) -> np.ndarray:
        return segment_points(self.start, self.end, s)

    @property
    def name(self) -> str:
        return f"{self.kind}{self.index}" if self.kind != "chord" else f"gamma{self.index}"


@dataclass(frozen=True, eq=False)
class TruncatedDomain:
    parent: ScherkPolygon
    level: int
    decoration: Decoration
    arcs: tuple  # clockwise: chord_0, side_0, chord_1, side_1, ...

    @property
    def n(self) -> int:
        return self.parent.n

    def arc(self, marker: int) -> Arc:
        for a in self.arcs:
            if a.marker == marker:
                return a
        raise KeyError(marker)

    def side_arcs(self, label: str | None = None) -> list:
        return [a for a in self.arcs if a.kind != "chord" and (label is None or a.kind == label)]

    def chord_arcs(self) -> list:
        return [a for a in self.arcs if a.kind == "chord"]

    def _lines(self):
        V = [v.z for v in self.parent.vertices]
        n = self.n
        lines = []
        for i in range(n):
            ref = V[(i + 2) % n]
            lines.append((V[i], V[(i + 1) % n], ref))
        for a in self.chord_arcs():
            lo, hi = line_endpoints(a.start, a.end)
            lines.append((lo, hi, V[(a.index + 2) % n]))
        return lines

    def signed_distance(self, z) -> np.ndarray:
        """Hyperbolic distance to the boundary lines, positive inside."""
        z = np.asarray(z, dtype=complex)
        out = np.full(z.shape, np.inf)
        for a, b, ref in self._lines():
            out = np.minimum(out, signed_side(z, a, b, ref))
        return out

    def contains(self, z, tol: float = 1e-12) -> np.ndarray:
        return self.signed_distance(z) >= -tol

    def cusp_width(self, z) -> np.ndarray:
        """Sum of distances to the two sides at the nearest cusp."""
        z = np.asarray(z, dtype=complex)
        V = [v.z for v in self.parent.vertices]
        n = self.n
        dist = [distance_to_geodesic(z, V[i], V[(i + 1) % n]) for i in range(n)]
        width = np.full(z.shape, np.inf)
        for i in range(n):
            width = np.minimum(width, dist[i - 1] + dist[i])
        return width

    def side_length(self, i: int) -> float:
        return self.arc(1 + i).length


def base_decoration(G: ScherkPolygon) -> Decoration:
    """Unit decoration, halved uniformly until the horocycles are disjoint."""
    return Decoration.unit(G.n).disjoint_for(G.vertices)


def truncate(G: ScherkPolygon, level: int = 0, decoration: Decoration | None = None) -> TruncatedDomain:
    """Truncated domain ``D(level)`` with sizes ``s_i(0) 2^{-level}``."""
    if level < 0:
        raise ValueError("level must be >= 0")
    dec = base_decoration(G) if decoration is None else decoration
    if len(dec) != G.n:
        raise MeshError(f"decoration has {len(dec)} sizes for {G.n} vertices")
    if not dec.is_disjoint(G.vertices):
        raise DecorationOverlap("base horocycles intersect")
    dec = dec.scaled(2.0 ** (-level))
    V = [v.z for v in G.vertices]
    n = G.n
    plus = [horocycle_geodesic_point(V[i], dec[i], V[(i + 1) % n]) for i in range(n)]
    minus = [horocycle_geodesic_point(V[i], dec[i], V[i - 1]) for i in range(n)]
    arcs = []
    for i in range(n):
        arcs.append(Arc(1 + n + i, "chord", i, minus[i], plus[i]))
        arcs.append(Arc(1 + i, G.label(i), i, plus[i], minus[(i + 1) % n]))
    return TruncatedDomain(G, level, dec, tuple(arcs))


# ---------------------------------------------------------------------------
# meshes


@dataclass(eq=False)
class TriMesh:
    nodes: np.ndarray  # (N, 2) disk coordinates
    triangles: np.ndarray  # (M, 3) int64, counter-clockwise
    markers: np.ndarray  # (N,) int64
    n_boundary: int
    h: float = float("nan")
    domain: TruncatedDomain | None = field(default=None, repr=False)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.markers = np.ascontiguousarray(self.markers, dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def z(self) -> np.ndarray:
        return self.nodes[:, 0] + 1j * self.nodes[:, 1]

    @property
    def boundary(self) -> np.ndarray:
        return np.arange(self.n_boundary)

    @property
    def interior(self) -> np.ndarray:
        return np.arange(self.n_boundary, self.n_nodes)

    def arc_nodes(self, marker: int) -> np.ndarray:
        """Nodes of a marked arc in boundary order, both endpoints included."""
        nb = self.n_boundary
        own = np.flatnonzero(self.markers[:nb] == marker)
        if own.size == 0:
            raise KeyError(marker)
        # the owned nodes are contiguous modulo nb; find the start of the run
        idx = set(own.tolist())
        start = next(i for i in own if (i - 1) % nb not in idx)
        run = [(start + j) % nb for j in range(own.size + 1)]
        return np.array(run, dtype=np.int64)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def hyperbolic_angles(self) -> np.ndarray:
        """Angles of the geodesic triangles on the mesh vertices, (M, 3) radians."""
        z = self.z[self.triangles]
        out = np.empty(z.shape)
        for a in range(3):
            p, q, r = z[:, a], z[:, (a + 1) % 3], z[:, (a + 2) % 3]
            # move p to the origin; geodesics through the origin are diameters
            qq = (q - p) / (1.0 - np.conj(p) * q)
            rr = (r - p) / (1.0 - np.conj(p) * r)
            out[:, a] = np.abs(np.angle(rr / qq))
        return out

    def hyperbolic_areas(self) -> np.ndarray:
        return math.pi - self.hyperbolic_angles().sum(axis=1)

    def edge_lengths(self) -> np.ndarray:
        """Hyperbolic lengths of triangle edges opposite each vertex, (M, 3)."""
        z = self.z[self.triangles]
        w = 1.0 - np.abs(z) ** 2
        out = np.empty(z.shape)
        for a in range(3):
            p, q = z[:, (a + 1) % 3], z[:, (a + 2) % 3]
            wp, wq = w[:, (a + 1) % 3], w[:, (a + 2) % 3]
            out[:, a] = np.arccosh(1.0 + 2.0 * np.abs(p - q) ** 2 / (wp * wq))
        return out

    # file format -------------------------------------------------------------

    def to_text(self, comments=()) -> str:
        lines = [MESH_MAGIC]
        lines += ["# " + c.replace("\n", " ") for c in comments]
        lines.append(f"{self.n_nodes} {self.n_triangles} {self.n_boundary}")
        for (x, y), m in zip(self.nodes.tolist(), self.markers.tolist()):
            lines.append(f"{x:.17g} {y:.17g} {m}")
        for i, j, k in self.triangles.tolist():
            lines.append(f"{i} {j} {k}")
        return "\n".join(lines) + "\n"

    def save(self, path, comments=()) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_text(comments))

    @classmethod
    def from_text(cls, text: str) -> "TriMesh":
        lines = text.splitlines()
        if not lines or lines[0].strip() != MESH_MAGIC:
            raise MeshError("not a scherk mesh file")
        lines = [lines[0]] + [ln for ln in lines[1:] if not ln.startswith("#")]
        try:
            nn, nt, nb = (int(v) for v in lines[1].split())
            body = lines[2:2 + nn]
            nodes = np.array([[float(v) for v in ln.split()[:2]] for ln in body])
            markers = np.array([int(ln.split()[2]) for ln in body], dtype=np.int64)
            tris = np.array([[int(v) for v in ln.split()] for ln in lines[2 + nn:2 + nn + nt]],
                            dtype=np.int64)
        except (ValueError, IndexError) as exc:
            raise MeshError(f"malformed mesh file: {exc}") from exc
        if nodes.shape != (nn, 2) or tris.shape != (nt, 3):
            raise MeshError("mesh file counts do not match its body")
        return cls(nodes, tris, markers, nb)

    @classmethod
    def load(cls, path) -> "TriMesh":
        with open(path) as fh:
            return cls.from_text(fh.read())


def _arc_samples(arc: Arc, size, min_pts: int = 2) -> np.ndarray:
    """Arclength positions along ``arc`` spaced by the local size function."""
    L = arc.length
    s = np.linspace(0.0, L, 400)
    dens = 1.0 / size(arc.points(s))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(s))])
    m = max(min_pts - 1, int(math.ceil(cum[-1])))
    return np.interp(np.linspace(0.0, cum[-1], m + 1), cum, s)


def size_function(dom: TruncatedDomain, h: float, grading: float):
    """Target hyperbolic edge length ``min(h, cusp width / (2 grading))``."""
    def size(z):
        return np.minimum(h, dom.cusp_width(z) / (2.0 * grading))
    return size


def mesh_polygon(boundary: np.ndarray, markers: np.ndarray, size, max_rounds: int = 30,
                 min_angle: float = 25.0) -> tuple:
    """Triangulate a closed boundary loop, refining to hyperbolic size ``size(z)``.

    No Steiner points are added on the boundary.  Returns ``(nodes,
    triangles, markers)`` with the boundary nodes first, in input order.
    """
    nb = boundary.shape[0]
    seg = np.stack([np.arange(nb), (np.arange(nb) + 1) % nb], axis=1)
    opts = f"pq{min_angle:g}Y"
    try:
        t = tr.triangulate({"vertices": boundary, "segments": seg}, opts)
        for _ in range(max_rounds):
            p = t["vertices"]
            tri = t["triangles"]
            c = p[tri].mean(axis=1)
            cz = c[:, 0] + 1j * c[:, 1]
            target = (size(cz) / conformal_factor(cz)) ** 2 * (math.sqrt(3.0) / 4.0)
            d1 = p[tri[:, 1]] - p[tri[:, 0]]
            d2 = p[tri[:, 2]] - p[tri[:, 0]]
            area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
            if np.all(area <= 1.5 * target):
                break
            t = tr.triangulate({"vertices": p, "segments": seg, "triangles": tri,
                                "triangle_max_area": np.minimum(target, area)},
                               "r" + opts + "a")
        else:
            raise MeshFailure("area refinement did not settle")
    except (RuntimeError, ValueError) as exc:
        raise MeshFailure(str(exc)) from exc
    p = t["vertices"]
    tri = np.asarray(t["triangles"], dtype=np.int64)
    if p.shape[0] < nb or not np.allclose(p[:nb], boundary, rtol=0, atol=0):
        raise MeshFailure("boundary nodes were not preserved")
    d1 = p[tri[:, 1]] - p[tri[:, 0]]
    d2 = p[tri[:, 2]] - p[tri[:, 0]]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tri[neg] = tri[neg][:, [0, 2, 1]]
    mk = np.zeros(p.shape[0], dtype=np.int64)
    mk[:nb] = markers
    return p, tri, mk


def triangulate(dom: TruncatedDomain, h: float = DEFAULT_H, grading: float = DEFAULT_GRADING) -> TriMesh:
    """Graded triangulation of a truncated domain.

    Parameters
    ----------
    dom : TruncatedDomain
    h : float
        Target hyperbolic edge length away from the cusps.
    grading : float
        Larger values shrink elements further inside the cusps, where the
        domain narrows towards the chords.
    """
    if not h > 0 or grading < 1:
        raise MeshFailure("need h > 0 and grading >= 1")
    size = size_function(dom, h, grading)
    pts = []
    mks = []
    for arc in dom.arcs:
        s = _arc_samples(arc, size)
        z = arc.points(s[:-1])
        z[0] = arc.start
        pts.append(z)
        mks.append(np.full(z.shape, arc.marker))
    z = np.concatenate(pts)
    boundary = np.stack([z.real, z.imag], axis=1)
    nodes, tri, mk = mesh_polygon(boundary, np.concatenate(mks), size)
    return TriMesh(nodes, tri, mk, boundary.shape[0], h, dom)
