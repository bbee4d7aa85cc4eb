"""Flux of ``X = grad u / W`` across arcs, cycles and the truncated boundary.

For a curve ``alpha`` with unit normal ``nu`` the flux is the hyperbolic
line integral ``F(alpha) = int <X, nu> ds``.  In disk coordinates, with
Euclidean gradient ``g`` and conformal factor ``lam``,

    <X, nu> ds = lam g.nu_e / sqrt(lam^2 + |g|^2) ds_e,

so the flux density never exceeds the hyperbolic length element.

Two estimators are provided for marked boundary arcs:

``"trace"``
    Gauss-Legendre line integral along the boundary edges of the arc, using
    the gradient of the triangle on each edge.  Bounded by the hyperbolic
    length of the arc.
``"conservative"``
    Nodal reactions ``R_i = dA/du_i`` summed over the arc, with weight 1/2
    at its two end nodes.  This is the flux through the inner boundary of
    the dual cells of the arc nodes, so the total over the whole boundary
    vanishes to solver tolerance.

Interior curves use the per-triangle flux vector of the discrete equations
(constant on each triangle), for which the boundary of any union of
median-dual cells carries zero flux up to the solver residual.

Orientation: ``nu`` is the right-hand normal of the direction of travel;
for marked boundary arcs it is the outer normal of the domain.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .hypgeo import MoebiusMap, conformal_factor
from .meshing import TriMesh
from .polygon import ScherkPolygon
from .solver import Solution, locate

_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


class FluxError(ValueError):
    pass


class ArcOutsideDomain(FluxError):
    pass


class MeshMismatch(FluxError):
    pass


# ---------------------------------------------------------------------------
# helpers


def _edge_triangles(mesh: TriMesh) -> dict:
    out = {}
    for t, (a, b, c) in enumerate(mesh.triangles.tolist()):
        out[(a, b)] = t
        out[(b, c)] = t
        out[(c, a)] = t
    return out


def _edge_map(mesh: TriMesh) -> dict:
    cache = getattr(mesh, "_edge_tri_cache", None)
    if cache is None:
        cache = _edge_triangles(mesh)
        mesh._edge_tri_cache = cache
    return cache


def polyline_length(z) -> float:
    """Hyperbolic length of a polyline of straight disk segments."""
    z = np.asarray(z, dtype=complex)
    a, b = z[:-1], z[1:]
    pts = a[:, None] + _GL_X[None, :] * (b - a)[:, None]
    return float(np.sum(np.abs(b - a) * (conformal_factor(pts) @ _GL_W)))


def _segment_flux_density(g: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gauss-Legendre flux of a constant Euclidean gradient through segments a->b.

    Right-hand normal; the hyperbolic factor varies along the segment.
    """
    d = b - a
    nu = -1j * d  # right-hand normal times segment length
    gn = g[:, 0] * nu.real + g[:, 1] * nu.imag
    g2 = np.sum(g * g, axis=1)
    pts = a[:, None] + _GL_X[None, :] * d[:, None]
    lam = conformal_factor(pts)
    dens = lam / np.sqrt(lam * lam + g2[:, None])
    return gn * (dens @ _GL_W)


# ---------------------------------------------------------------------------
# fluxes


def arc_flux(sol: Solution, marker: int, method: str = "trace") -> float:
    """Outward flux across a marked boundary arc."""
    mesh = sol.mesh
    nodes = mesh.arc_nodes(marker)
    if method == "conservative":
        w = np.ones(nodes.size)
        w[0] = w[-1] = 0.5
        return float(np.sum(w * sol.reactions[nodes]))
    if method != "trace":
        raise ValueError(f"unknown flux method {method!r}")
    return boundary_edge_flux(sol, nodes, geodesic=mesh.domain is not None)


def _geodesic_flux(g: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Flux of constant Euclidean gradients through the geodesic arcs a->b.

    The arc is traversed at unit hyperbolic speed, so the integrand is
    ``g.(-i z') lam / sqrt(lam^2 + |g|^2)`` with ``lam |z'| = 1``.
    """
    out = np.empty(a.size)
    g2 = np.sum(g * g, axis=1)
    for k in range(a.size):
        t = MoebiusMap.to_origin(a[k])
        w = complex(t(b[k]))
        L = 2.0 * math.atanh(abs(w))
        u = w / abs(w)
        s = _GL_X * L
        zeta = np.tanh(0.5 * s) * u
        back = t.inverse()
        z = back(zeta)
        # derivative of the inverse map (alpha zeta + beta) / (conj(beta) zeta + conj(alpha))
        dz = 0.5 / np.cosh(0.5 * s) ** 2 * u / (np.conj(back.beta) * zeta + np.conj(back.alpha)) ** 2
        nu = -1j * dz
        lam = conformal_factor(z)
        dens = (g[k, 0] * nu.real + g[k, 1] * nu.imag) * lam / np.sqrt(lam * lam + g2[k])
        out[k] = L * float(dens @ _GL_W)
    return out


def boundary_edge_flux(sol: Solution, nodes, geodesic: bool = False) -> float:
    """Outward trace flux along consecutive boundary nodes.

    With ``geodesic=True`` each edge is replaced by the geodesic arc between
    its end nodes (the exact boundary of a truncated domain), which bounds
    the flux by the hyperbolic length of the arc.
    """
    mesh = sol.mesh
    emap = _edge_map(mesh)
    z = mesh.z
    nodes = np.asarray(nodes)
    a_idx, b_idx = nodes[:-1], nodes[1:]
    tris = np.empty(a_idx.size, dtype=np.int64)
    sign = np.empty(a_idx.size)
    for k, (p, q) in enumerate(zip(a_idx.tolist(), b_idx.tolist())):
        if (p, q) in emap:
            # the triangle lies to the left of p->q: the right-hand normal points out
            tris[k], sign[k] = emap[(p, q)], 1.0
        elif (q, p) in emap:
            tris[k], sign[k] = emap[(q, p)], -1.0
        else:
            raise ArcOutsideDomain(f"({p}, {q}) is not a mesh edge")
    g = sol.gradients()[tris]
    if geodesic:
        vals = _geodesic_flux(g, z[a_idx], z[b_idx])
    else:
        vals = _segment_flux_density(g, z[a_idx], z[b_idx])
    return float(np.sum(sign * vals))


def flux(sol: Solution, arc, method: str = "trace") -> float:
    """Flux across a marked arc, a node path, or an arbitrary polyline.

    Parameters
    ----------
    sol : Solution
    arc : int, sequence of int, or array of complex
        A marker (outward flux across that boundary arc), a path of mesh
        nodes, or disk points joined by straight segments.
    method : {"trace", "conservative"}
        Estimator for marked arcs; see the module docstring.
    """
    if isinstance(arc, (int, np.integer)):
        return arc_flux(sol, int(arc), method)
    arr = np.asarray(arc)
    if np.issubdtype(arr.dtype, np.integer):
        return node_path_flux(sol, arr)
    return polyline_flux(sol, arr.astype(complex))


def node_path_flux(sol: Solution, nodes) -> float:
    """Flux along mesh edges; interior edges average the two neighbouring triangles."""
    mesh = sol.mesh
    emap = _edge_map(mesh)
    z = mesh.z
    g_all = sol.gradients()
    total = 0.0
    for p, q in zip(np.asarray(nodes)[:-1].tolist(), np.asarray(nodes)[1:].tolist()):
        ts = [emap[e] for e in ((p, q), (q, p)) if e in emap]
        if not ts:
            raise ArcOutsideDomain(f"({p}, {q}) is not a mesh edge")
        vals = [_segment_flux_density(g_all[[t]], z[[p]], z[[q]])[0] for t in ts]
        total += float(np.mean(vals))
    return total


def _split_segment(mesh: TriMesh, a: complex, b: complex) -> np.ndarray:
    """Parameters in [0, 1] where segment a->b crosses mesh edges."""
    e = _unique_edges(mesh)
    z = mesh.z
    p, q = z[e[:, 0]], z[e[:, 1]]
    d = b - a
    r = q - p
    den = d.real * r.imag - d.imag * r.real
    ok = np.abs(den) > 1e-300
    w = p - a
    t = np.where(ok, (w.real * r.imag - w.imag * r.real) / np.where(ok, den, 1.0), -1.0)
    s = np.where(ok, (w.real * d.imag - w.imag * d.real) / np.where(ok, den, 1.0), -1.0)
    hit = ok & (t > 0) & (t < 1) & (s >= 0) & (s <= 1)
    return np.unique(np.concatenate([[0.0, 1.0], t[hit]]))


def _unique_edges(mesh: TriMesh) -> np.ndarray:
    cache = getattr(mesh, "_unique_edge_cache", None)
    if cache is None:
        tri = mesh.triangles
        e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        cache = np.unique(np.sort(e, axis=1), axis=0)
        mesh._unique_edge_cache = cache
    return cache


def polyline_flux(sol: Solution, z, *, split: bool = True) -> float:
    """Flux of the per-triangle flux vectors across straight disk segments.

    Each segment is cut where it crosses mesh edges (``split=True``) so
    every piece lies in one triangle.  With ``split=False`` the caller
    guarantees this already (dual-cell edges).
    """
    z = np.asarray(z, dtype=complex)
    mesh = sol.mesh
    K = sol.flux_vectors
    a_list, b_list = [], []
    for a, b in zip(z[:-1], z[1:]):
        ts = _split_segment(mesh, a, b) if split else np.array([0.0, 1.0])
        pts = a + ts * (b - a)
        a_list.append(pts[:-1])
        b_list.append(pts[1:])
    a = np.concatenate(a_list)
    b = np.concatenate(b_list)
    tri, _ = locate(mesh, 0.5 * (a + b))
    if np.any(tri < 0):
        raise ArcOutsideDomain("polyline leaves the mesh")
    nu = -1j * (b - a)
    k = K[tri]
    return float(np.sum(k[:, 0] * nu.real + k[:, 1] * nu.imag))


# ---------------------------------------------------------------------------
# closed cycles


def dual_cycle_segments(mesh: TriMesh, nodes) -> tuple:
    """Oriented dual edges bounding the union of median-dual cells of ``nodes``.

    Returns ``(a, b, tri)``: segment start and end points (complex) and the
    triangle containing each segment.  The cells lie to the left of each
    segment, so right-hand normals point out of the region.
    """
    inside = np.zeros(mesh.n_nodes, dtype=bool)
    inside[np.asarray(nodes)] = True
    if np.any(inside[:mesh.n_boundary]):
        raise ArcOutsideDomain("dual cycles must enclose interior nodes only")
    z = mesh.z
    tri = mesh.triangles
    c = z[tri].mean(axis=1)
    a_l, b_l, t_l = [], [], []
    for t in range(tri.shape[0]):
        v = tri[t]
        for k in range(3):
            i, j = v[k], v[(k + 1) % 3]
            if inside[i] == inside[j]:
                continue
            m = 0.5 * (z[i] + z[j])
            # for a ccw triangle, travelling centroid -> midpoint of (i, j) keeps i on the right
            if inside[j]:
                a_l.append(c[t]), b_l.append(m)
            else:
                a_l.append(m), b_l.append(c[t])
            t_l.append(t)
    return np.array(a_l), np.array(b_l), np.array(t_l, dtype=np.int64)


def cycle_flux(sol: Solution, nodes) -> tuple:
    """``(flux, hyperbolic length)`` of the dual cycle around ``nodes``."""
    a, b, t = dual_cycle_segments(sol.mesh, nodes)
    K = sol.flux_vectors[t]
    nu = -1j * (b - a)
    F = float(np.sum(K[:, 0] * nu.real + K[:, 1] * nu.imag))
    length = sum(polyline_length(np.array([p, q])) for p, q in zip(a, b))
    return F, length


def random_node_region(mesh: TriMesh, rng: np.random.Generator, size: int) -> np.ndarray:
    """Connected set of interior nodes grown breadth-first from a random seed."""
    tri = mesh.triangles
    nb = mesh.n_boundary
    nbrs = [set() for _ in range(mesh.n_nodes)]
    for a, b, c in tri.tolist():
        nbrs[a].update((b, c))
        nbrs[b].update((a, c))
        nbrs[c].update((a, b))
    interior = mesh.interior
    seed = int(rng.choice(interior))
    region = [seed]
    seen = {seed}
    frontier = [seed]
    while frontier and len(region) < size:
        nxt = []
        for v in frontier:
            cand = sorted(w for w in nbrs[v] if w >= nb and w not in seen)
            rng.shuffle(cand)
            for w in cand:
                if len(region) >= size:
                    break
                seen.add(w)
                region.append(w)
                nxt.append(w)
        frontier = nxt
    return np.array(sorted(region), dtype=np.int64)


def random_cycles(sol: Solution, rng: np.random.Generator, count: int = 20,
                  max_size: int = 200) -> list:
    """``count`` random dual cycles: list of ``(nodes, flux, length)``."""
    out = []
    cap = max(2, min(max_size, sol.mesh.interior.size))
    for _ in range(count):
        nodes = random_node_region(sol.mesh, rng, int(rng.integers(1, cap)))
        F, L = cycle_flux(sol, nodes)
        out.append((nodes, F, L))
    return out


# ---------------------------------------------------------------------------
# comparison of boundary normals of two solutions


@dataclass
class NormalComparison:
    n_active: int
    n_skipped: int
    min_slack: float  # min of <X'-X, eta> - |n'-n|^2 / 4
    min_slack_projection: float  # min of |n'-n|^2 / 4 - |X'-X|^2 / 4
    worst_triangle: int

    def to_dict(self) -> dict:
        return {"n_active": self.n_active, "n_skipped": self.n_skipped,
                "min_slack": self.min_slack, "min_slack_projection": self.min_slack_projection,
                "worst_triangle": self.worst_triangle}


def normal_comparison(w: Solution, w2: Solution, grad_tol: float = 1e-9) -> NormalComparison:
    """Compare the graph normals of two solutions on the same mesh, per triangle.

    With ``p`` the hyperbolic gradient in an orthonormal frame,
    ``W = sqrt(1 + |p|^2)``, ``X = p / W`` and the downward unit normal
    ``n = (X, -1/W)``, check ``<X' - X, eta> >= |n' - n|^2 / 4 >= |X' - X|^2 / 4``
    where ``eta`` is the unit hyperbolic gradient of ``w2 - w``.  Triangles
    with ``|grad(w2 - w)| <= grad_tol`` are skipped.
    """
    m1, m2 = w.mesh, w2.mesh
    if m1 is not m2 and (m1.nodes.shape != m2.nodes.shape or m1.triangles.shape != m2.triangles.shape
                         or not np.array_equal(m1.nodes, m2.nodes)
                         or not np.array_equal(m1.triangles, m2.triangles)):
        raise MeshMismatch("solutions live on different meshes")
    p1, W1, X1 = w.hyperbolic_fields()
    p2, W2, X2 = w2.hyperbolic_fields()
    dp = p2 - p1
    nd = np.linalg.norm(dp, axis=1)
    lam = w.assembly.lam_c
    active = nd * lam > grad_tol  # Euclidean gradient of the difference
    eta = dp[active] / nd[active, None]
    dX = (X2 - X1)[active]
    lhs = np.sum(dX * eta, axis=1)
    dn2 = np.sum(dX * dX, axis=1) + (1.0 / W2[active] - 1.0 / W1[active]) ** 2
    slack = lhs - 0.25 * dn2
    slack2 = 0.25 * dn2 - 0.25 * np.sum(dX * dX, axis=1)
    if slack.size == 0:
        return NormalComparison(0, int(active.size), math.inf, math.inf, -1)
    j = int(np.argmin(slack))
    return NormalComparison(int(active.sum()), int((~active).sum()), float(slack[j]),
                            float(slack2.min()), int(np.flatnonzero(active)[j]))


# ---------------------------------------------------------------------------
# reports


@dataclass
class FluxReport:
    """Flux series: one row per (solution, arc)."""

    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    FIELDS = ("n", "arc", "flux", "flux_conservative", "truncated_length", "ratio")

    def add(self, n, arc_name, F, Fc, length):
        self.rows.append({"n": n, "arc": arc_name, "flux": F, "flux_conservative": Fc,
                          "truncated_length": length, "ratio": F / length})

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.config:
            buf.write("# config: " + json.dumps(self.config, sort_keys=True) + "\n")
        wr = csv.DictWriter(buf, fieldnames=self.FIELDS, lineterminator="\n")
        wr.writeheader()
        for r in self.rows:
            wr.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()

    def series(self, arc_name: str) -> list:
        return [r for r in self.rows if r["arc"] == arc_name]


def flux_series(seq: list, markers=None, config: dict | None = None) -> FluxReport:
    """Fluxes across marked arcs for every solution of a sequence."""
    rep = FluxReport(config=dict(config or {}))
    for sol in seq:
        dom = sol.mesh.domain
        arcs = dom.arcs if markers is None else [dom.arc(m) for m in markers]
        for arc in arcs:
            rep.add(sol.meta.get("n", float("nan")), arc.name, arc_flux(sol, arc.marker, "trace"),
                    arc_flux(sol, arc.marker, "conservative"), arc.length)
    return rep


@dataclass
class AuditRow:
    n: float
    level: int
    sum_a: float
    sum_b: float
    sum_chords: float
    defect: float
    defect_trace: float
    a_truncated: float
    b_truncated: float
    chord_length: float
    perimeter: float

    @property
    def gap_a(self) -> float:
        """``a - sum_a``: how far the A-side fluxes are from saturation."""
        return self.a_truncated - self.sum_a

    def to_dict(self) -> dict:
        return {**self.__dict__, "gap_a": self.gap_a}


@dataclass
class AuditReport:
    rows: list
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": [r.to_dict() for r in self.rows],
                "max_relative_defect": max((r.defect / r.perimeter for r in self.rows), default=0.0)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.config:
            buf.write("# config: " + json.dumps(self.config, sort_keys=True) + "\n")
        names = list(AuditRow.__dataclass_fields__)
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(names)
        for r in self.rows:
            wr.writerow([repr(float(getattr(r, k))) if isinstance(getattr(r, k), float) else getattr(r, k)
                         for k in names])
        return buf.getvalue()


def balance_audit(G: ScherkPolygon, seq: list, config: dict | None = None) -> AuditReport:
    """Boundary flux bookkeeping per solution of a sequence.

    ``sum_a``, ``sum_b`` and ``sum_chords`` use the trace estimator and
    ``defect_trace`` is the modulus of their total, a discretization error.
    ``defect`` is the same total with the conservative estimator, which
    vanishes to solver tolerance.
    """
    rows = []
    for sol in seq:
        dom = sol.mesh.domain
        if dom is None or (dom.parent is not G and dom.parent.angles != G.angles):
            raise MeshMismatch("solution does not belong to this polygon")
        tr = {a.marker: arc_flux(sol, a.marker, "trace") for a in dom.arcs}
        cons = sum(arc_flux(sol, a.marker, "conservative") for a in dom.arcs)
        sa = sum(tr[a.marker] for a in dom.side_arcs("A"))
        sb = sum(tr[a.marker] for a in dom.side_arcs("B"))
        sc = sum(tr[a.marker] for a in dom.chord_arcs())
        la = sum(a.length for a in dom.side_arcs("A"))
        lb = sum(a.length for a in dom.side_arcs("B"))
        lc = sum(a.length for a in dom.chord_arcs())
        rows.append(AuditRow(float(sol.meta.get("n", float("nan"))), int(dom.level), sa, sb, sc,
                             abs(cons), abs(sa + sb + sc), la, lb, lc, la + lb + lc))
    return AuditReport(rows, dict(config or {}))
