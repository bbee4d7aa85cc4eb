"""Intrinsic geometry of a solved graph in H x R.

The piecewise-linear graph of a nodal function ``u`` over a mesh is given
the product metric: an edge whose base is the hyperbolic geodesic of length
``d`` and whose end heights differ by ``du`` has length ``sqrt(d^2 + du^2)``.
Each triangle is then a flat triangle with those side lengths, and the
surface is the resulting polyhedral metric.

Ring moduli use the convention ``M = 2 pi / E`` where ``E`` is the
Dirichlet energy of the harmonic measure of the ring (potential 0 on one
loop, 1 on the other).  The round annulus ``r < |z| < R`` then has
``M = ln(R / r)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph  # noqa: F401
import scipy.sparse.linalg as spla
import triangle as tr

from .hypgeo import _as_complex, hyperbolic_distances
from .meshing import TriMesh


class AnalysisError(ValueError):
    pass


class NotAnAnnulus(AnalysisError):
    pass


class DegenerateMetric(AnalysisError):
    pass


# ---------------------------------------------------------------------------
# metric


def _angles_from_lengths(L: np.ndarray) -> np.ndarray:
    """Corner angles of flat triangles from the side lengths opposite each corner."""
    a, b, c = L[:, 0], L[:, 1], L[:, 2]
    out = np.empty_like(L)
    for i, (x, y, z) in enumerate(((a, b, c), (b, c, a), (c, a, b))):
        cos = (y * y + z * z - x * x) / (2.0 * y * z)
        out[:, i] = np.arccos(np.clip(cos, -1.0, 1.0))
    return out


def _heron(L: np.ndarray) -> np.ndarray:
    """Kahan's stable Heron formula."""
    s = -np.sort(-L, axis=1)
    a, b, c = s[:, 0], s[:, 1], s[:, 2]
    prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    return 0.25 * np.sqrt(np.maximum(prod, 0.0))


@dataclass
class GraphMetric:
    """Polyhedral metric on a triangle mesh.

    Attributes
    ----------
    mesh : TriMesh
    lengths : ndarray, shape (M, 3)
        Side length opposite each triangle corner.
    base_lengths : ndarray, shape (M, 3)
        The same sides measured in the base (``u`` ignored).
    """

    mesh: TriMesh
    lengths: np.ndarray
    base_lengths: np.ndarray

    def __post_init__(self):
        L = self.lengths
        if L.shape != (self.mesh.n_triangles, 3):
            raise DegenerateMetric("one length per triangle corner is required")
        a, b, c = L[:, 0], L[:, 1], L[:, 2]
        slack = np.minimum.reduce([b + c - a, c + a - b, a + b - c])
        if np.any(L <= 0) or np.any(slack <= 0):
            raise DegenerateMetric("triangle inequality fails on some triangle")

    @property
    def angles(self) -> np.ndarray:
        return _angles_from_lengths(self.lengths)

    @property
    def areas(self) -> np.ndarray:
        return _heron(self.lengths)

    @property
    def base_areas(self) -> np.ndarray:
        return _heron(self.base_lengths)

    def area(self) -> float:
        return float(self.areas.sum())

    def scaled(self, c: float) -> "GraphMetric":
        return GraphMetric(self.mesh, c * self.lengths, c * self.base_lengths)

    def cotan_laplacian(self) -> sp.csr_matrix:
        """Stiffness matrix ``K`` with ``u.K.u`` the Dirichlet energy."""
        tri = self.mesh.triangles
        cot = 1.0 / np.tan(self.angles)
        n = self.mesh.n_nodes
        rows, cols, vals = [], [], []
        for a in range(3):
            i, j = tri[:, (a + 1) % 3], tri[:, (a + 2) % 3]
            w = 0.5 * cot[:, a]
            rows += [i, j, i, j]
            cols += [j, i, i, j]
            vals += [-w, -w, w, w]
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(n, n))


def _hyperbolic_edge_lengths(mesh: TriMesh) -> np.ndarray:
    return mesh.edge_lengths()


def metric_from_heights(mesh: TriMesh, u: np.ndarray, base: np.ndarray | None = None) -> GraphMetric:
    """Product metric of the graph of ``u``; ``base`` defaults to hyperbolic lengths."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise AnalysisError("one height per node is required")
    base = _hyperbolic_edge_lengths(mesh) if base is None else np.asarray(base, dtype=float)
    tri = mesh.triangles
    du = np.stack([u[tri[:, (a + 2) % 3]] - u[tri[:, (a + 1) % 3]] for a in range(3)], axis=1)
    return GraphMetric(mesh, np.sqrt(base * base + du * du), base)


def induced_metric(sol) -> GraphMetric:
    """Metric of the graph surface of a solution in H x R."""
    return metric_from_heights(sol.mesh, sol.u)


def euclidean_metric(mesh: TriMesh) -> GraphMetric:
    """Flat metric of the mesh as drawn in the plane."""
    p = mesh.nodes[mesh.triangles]
    L = np.stack([np.hypot(*(p[:, (a + 2) % 3] - p[:, (a + 1) % 3]).T) for a in range(3)], axis=1)
    return GraphMetric(mesh, L, L.copy())


# ---------------------------------------------------------------------------
# curvature


def angle_defects(gm: GraphMetric) -> np.ndarray:
    """``2 pi - (sum of corner angles)`` at every node; boundary nodes included."""
    ang = gm.angles
    tot = np.bincount(gm.mesh.triangles.ravel(), weights=ang.ravel(), minlength=gm.mesh.n_nodes)
    return 2.0 * math.pi - tot


def total_curvature(gm: GraphMetric) -> float:
    """Integral of the Gauss curvature as the sum of interior angle defects."""
    return float(angle_defects(gm)[gm.mesh.interior].sum())


def boundary_turning(gm: GraphMetric) -> float:
    """Total geodesic turning ``sum (pi - corner sum)`` over boundary nodes.

    Together with ``total_curvature`` this satisfies the discrete
    Gauss-Bonnet identity ``K + turning = 2 pi chi`` exactly.
    """
    d = angle_defects(gm)[gm.mesh.boundary]
    return float(np.sum(d - math.pi))


def euler_characteristic(mesh: TriMesh) -> int:
    tri = mesh.triangles
    e = np.sort(np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    n_edges = np.unique(e, axis=0).shape[0]
    return int(mesh.n_nodes - n_edges + mesh.n_triangles)


@dataclass
class CurvatureRow:
    n: float
    level: int
    h: float
    total_curvature: float
    boundary_turning: float
    graph_area: float
    base_area: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def curvature_series(seq: list) -> list:
    """Total curvature of the graph of each solution in a sequence."""
    rows = []
    for sol in seq:
        gm = induced_metric(sol)
        rows.append(CurvatureRow(float(sol.meta.get("n", float("nan"))),
                                 int(sol.meta.get("level", -1)), float(sol.mesh.h),
                                 total_curvature(gm), boundary_turning(gm), gm.area(),
                                 float(sol.mesh.hyperbolic_areas().sum())))
    return rows


def curvature_csv(rows: list, config: dict | None = None) -> str:
    head = ["n", "level", "h", "total_curvature", "boundary_turning", "graph_area", "base_area"]
    lines = []
    if config is not None:
        lines.append("# config " + json.dumps(config, sort_keys=True))
    lines.append(",".join(head))
    for r in rows:
        d = r.to_dict()
        lines.append(",".join(repr(d[k]) if isinstance(d[k], float) else str(d[k]) for k in head))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# rings


def _boundary_loops(tri: np.ndarray) -> list:
    """Closed node loops bounding a set of consistently oriented triangles."""
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    directed = set(map(tuple, e.tolist()))
    nxt = {}
    for a, b in directed:
        if (b, a) not in directed:
            if a in nxt:
                raise NotAnAnnulus("boundary is pinched at a node")
            nxt[a] = b
    loops = []
    seen = set()
    for s in sorted(nxt):
        if s in seen:
            continue
        loop = [s]
        seen.add(s)
        v = nxt[s]
        while v != s:
            if v in seen or v not in nxt:
                raise NotAnAnnulus("boundary edges do not form closed loops")
            loop.append(v)
            seen.add(v)
            v = nxt[v]
        loops.append(np.array(loop, dtype=np.int64))
    return loops


def _connected(tri: np.ndarray) -> bool:
    if tri.shape[0] == 0:
        return False
    m = tri.shape[0]
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    e = np.sort(e, axis=1)
    owner = np.tile(np.arange(m), 3)
    order = np.lexsort((e[:, 1], e[:, 0]))
    e, owner = e[order], owner[order]
    same = np.all(e[1:] == e[:-1], axis=1)
    a, b = owner[:-1][same], owner[1:][same]
    g = sp.coo_matrix((np.ones(a.size), (a, b)), shape=(m, m))
    ncomp, _ = sp.csgraph.connected_components(g, directed=False)
    return ncomp == 1


@dataclass
class RingSpec:
    """An annular set of triangles with its two plates.

    ``inner`` and ``outer`` are node sets held at potential 0 and 1.  For
    rings built by ``from_triangles`` they are the two boundary loops and
    ``inner`` is the loop of smaller enclosed Euclidean area in the disk
    picture; the modulus does not depend on which loop gets potential 0.
    """

    triangles: np.ndarray  # indices into mesh.triangles
    inner: np.ndarray
    outer: np.ndarray

    @classmethod
    def from_triangles(cls, mesh: TriMesh, tri_idx) -> "RingSpec":
        tri_idx = np.asarray(tri_idx, dtype=np.int64)
        sub = mesh.triangles[tri_idx]
        if not _connected(sub):
            raise NotAnAnnulus("triangle set is empty or disconnected")
        loops = _boundary_loops(sub)
        if len(loops) != 2:
            raise NotAnAnnulus(f"expected two boundary loops, found {len(loops)}")

        def enclosed(loop):
            p = mesh.nodes[loop]
            return abs(0.5 * np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1]))

        a, b = loops
        if enclosed(a) > enclosed(b):
            a, b = b, a
        if np.intersect1d(a, b).size:
            raise NotAnAnnulus("the two loops share a node")
        return cls(tri_idx, a, b)

    def to_dict(self) -> dict:
        return {"n_triangles": int(self.triangles.size), "inner": self.inner.tolist(),
                "outer": self.outer.tolist()}


def level_rings(mesh: TriMesh, f: np.ndarray, levels) -> list:
    """Rings ``levels[i] <= f < levels[i+1]`` of a per-triangle function ``f``."""
    levels = np.asarray(levels, dtype=float)
    if levels.ndim != 1 or levels.size < 2 or np.any(np.diff(levels) <= 0):
        raise AnalysisError("levels must be strictly increasing with at least two entries")
    out = []
    for lo, hi in zip(levels[:-1], levels[1:]):
        out.append(RingSpec.from_triangles(mesh, np.flatnonzero((f >= lo) & (f < hi))))
    return out


def condenser_rings(mesh: TriMesh, f: np.ndarray, levels) -> list:
    """Condensers between sublevel and superlevel sets of a nodal function.

    For consecutive levels ``lo < hi`` the plates are the node sets
    ``f <= lo`` and ``f >= hi``; the ring is every triangle not lying
    entirely on one plate.  Unlike triangle bands this never needs the
    ring to have clean boundary loops, so jagged level sets are harmless.
    """
    f = np.asarray(f, dtype=float)
    levels = np.asarray(levels, dtype=float)
    if levels.ndim != 1 or levels.size < 2 or np.any(np.diff(levels) <= 0):
        raise AnalysisError("levels must be strictly increasing with at least two entries")
    tri = mesh.triangles
    out = []
    for lo, hi in zip(levels[:-1], levels[1:]):
        low, high = f <= lo, f >= hi
        keep = ~(np.all(low[tri], axis=1) | np.all(high[tri], axis=1))
        idx = np.flatnonzero(keep)
        used = np.unique(tri[idx])
        inner, outer = used[low[used]], used[high[used]]
        if idx.size == 0 or inner.size == 0 or outer.size == 0:
            raise NotAnAnnulus(f"levels {lo:g}..{hi:g} do not separate two plates")
        out.append(RingSpec(idx, inner, outer))
    return out


def distance_rings(mesh: TriMesh, center, radii) -> list:
    """Condensers between hyperbolic balls of consecutive radii around ``center``."""
    return condenser_rings(mesh, hyperbolic_distances(_as_complex(center), mesh.z), radii)


def ring_modulus(gm: GraphMetric, ring: RingSpec) -> float:
    """Conformal modulus ``2 pi / E`` of a ring in the metric ``gm``."""
    mesh = gm.mesh
    sub = GraphMetric(TriMesh(mesh.nodes, mesh.triangles[ring.triangles],
                              np.zeros(mesh.n_nodes, dtype=np.int64), 0),
                      gm.lengths[ring.triangles], gm.base_lengths[ring.triangles])
    K = sub.cotan_laplacian().tocsr()
    used = np.unique(mesh.triangles[ring.triangles])
    fixed = np.concatenate([ring.inner, ring.outer])
    free = np.setdiff1d(used, fixed)
    phi = np.zeros(mesh.n_nodes)
    phi[ring.outer] = 1.0
    if free.size:
        A = K[free][:, free].tocsc()
        rhs = -K[free][:, fixed] @ phi[fixed]
        phi[free] = spla.spsolve(A, rhs)
    E = float(phi @ (K @ phi))
    if not E > 0:
        raise NotAnAnnulus("ring has no Dirichlet energy")
    return 2.0 * math.pi / E


@dataclass
class RingReport:
    radii: list
    moduli: list
    convention: str = "M = 2*pi/E; the round annulus r<|z|<R has M = ln(R/r)"

    def to_dict(self) -> dict:
        return {"convention": self.convention, "radii": self.radii, "moduli": self.moduli}


def ring_report(sol, center, radii) -> RingReport:
    gm = induced_metric(sol)
    rings = distance_rings(sol.mesh, center, radii)
    return RingReport([float(r) for r in radii], [ring_modulus(gm, r) for r in rings])


# ---------------------------------------------------------------------------
# oracle mesh


def annulus_mesh(r: float = 1.0, R: float = math.e, n_inner: int = 64,
                 max_area: float | None = None) -> TriMesh:
    """Planar annulus ``r < |z| < R`` (Euclidean geometry, not the disk model).

    Boundary nodes come first: the outer circle clockwise with marker 1, then
    the inner circle with marker 2.
    """
    if not 0 < r < R:
        raise AnalysisError("need 0 < r < R")
    n_outer = max(8, int(round(n_inner * R / r)))
    to = -2.0 * math.pi * np.arange(n_outer) / n_outer
    ti = -2.0 * math.pi * np.arange(n_inner) / n_inner
    pts = np.concatenate([np.stack([R * np.cos(to), R * np.sin(to)], axis=1),
                          np.stack([r * np.cos(ti), r * np.sin(ti)], axis=1)])
    so = np.stack([np.arange(n_outer), (np.arange(n_outer) + 1) % n_outer], axis=1)
    si = n_outer + np.stack([np.arange(n_inner), (np.arange(n_inner) + 1) % n_inner], axis=1)
    if max_area is None:
        max_area = (2.0 * math.pi * r / n_inner) ** 2 * math.sqrt(3.0) / 4.0
    t = tr.triangulate({"vertices": pts, "segments": np.concatenate([so, si]),
                        "holes": [[0.0, 0.0]]}, f"pq30Ya{max_area:.17g}")
    p = t["vertices"]
    tri = np.asarray(t["triangles"], dtype=np.int64)
    d1 = p[tri[:, 1]] - p[tri[:, 0]]
    d2 = p[tri[:, 2]] - p[tri[:, 0]]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tri[neg] = tri[neg][:, [0, 2, 1]]
    mk = np.zeros(p.shape[0], dtype=np.int64)
    mk[:n_outer] = 1
    mk[n_outer:n_outer + n_inner] = 2
    return TriMesh(p, tri, mk, n_outer + n_inner)


def annulus_ring(mesh: TriMesh) -> RingSpec:
    """The whole annulus mesh as a ring."""
    return RingSpec.from_triangles(mesh, np.arange(mesh.n_triangles))


__all__ = ["GraphMetric", "RingSpec", "RingReport", "CurvatureRow", "induced_metric",
           "metric_from_heights", "euclidean_metric", "total_curvature", "boundary_turning",
           "angle_defects", "euler_characteristic", "ring_modulus", "level_rings",
           "distance_rings", "condenser_rings", "ring_report", "curvature_series", "curvature_csv",
           "annulus_mesh", "annulus_ring", "NotAnAnnulus", "DegenerateMetric", "AnalysisError"]
