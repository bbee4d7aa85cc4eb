"""Discrete minimal graphs over hyperbolic domains.

A height function ``u`` on a domain of the disk model has graph area (in the
product metric of H x R)

    A(u) = int lam sqrt(lam^2 + |grad u|^2) dx dy,   lam = 2 / (1 - |z|^2),

with Euclidean gradient ``grad u``.  ``solve`` minimizes the P1 version of
``A`` with fixed boundary values by damped Newton; the integrand is
evaluated with a seven-point degree-five rule on every triangle.

Solution file format
--------------------
Binary, little-endian::

    offset 0   8 bytes   magic b"SCHERKU\\0"
    offset 8   uint32    format version (1)
    offset 12  uint32    length L of the JSON metadata block
    offset 16  L bytes   UTF-8 JSON (mesh reference, counts, solver summary, run config)
    ...        zero padding up to a multiple of 8 bytes
    ...        n_nodes float64 nodal heights
"""

from __future__ import annotations

import concurrent.futures as cf
import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph  # noqa: F401  (registers sp.csgraph)
import scipy.sparse.linalg as spla

from . import kernels
from .hypgeo import (ORIGIN, GeometryError, InteriorPoint, _as_complex, cayley,
                     conformal_factor, distance_to_geodesic, hyperbolic_distances, inverse_cayley)
from .meshing import DEFAULT_GRADING, DEFAULT_H, TriMesh, triangulate, truncate
from .polygon import ScherkPolygon, check_admissibility

TOL_SOLVE = 1e-10
MAX_ITER = 200
MIN_ANGLE_DEG = 1.0

# seven-point degree-five rule on the reference triangle (barycentric, weights sum to 1)
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
QUAD_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
QUAD_WEIGHTS = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)


class SolverError(RuntimeError):
    pass


class NonConvergence(SolverError):
    pass


class SingularSystem(SolverError):
    pass


class NotAdmissible(SolverError):
    pass


class DomainError(ValueError):
    pass


def thread_count() -> int:
    """Worker cap from ``SCHERK_THREADS`` (default: up to 4 cores)."""
    raw = os.environ.get("SCHERK_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


# ---------------------------------------------------------------------------
# geometry of a mesh


@dataclass(eq=False)
class Assembly:
    """Per-triangle data reused across Newton iterations."""

    mesh: TriMesh
    gx: np.ndarray
    gy: np.ndarray
    area: np.ndarray
    lam: np.ndarray
    lam_c: np.ndarray
    rows: np.ndarray
    cols: np.ndarray

    @classmethod
    def build(cls, mesh: TriMesh) -> "Assembly":
        p = mesh.nodes[mesh.triangles]
        x, y = p[..., 0], p[..., 1]
        det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
        if np.any(det <= 0):
            raise SingularSystem("mesh has degenerate or inverted triangles")
        ang = np.degrees(mesh.hyperbolic_angles().min())
        if ang < MIN_ANGLE_DEG:
            raise SingularSystem(f"triangle with hyperbolic angle {ang:.3g} deg")
        gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / det[:, None]
        gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / det[:, None]
        zq = np.einsum("qa,mak->mqk", QUAD_BARY, p)  # (M, Q, 2)
        lam = conformal_factor(zq[..., 0] + 1j * zq[..., 1])
        c = p.mean(axis=1)
        lam_c = conformal_factor(c[:, 0] + 1j * c[:, 1])
        tri = mesh.triangles
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        return cls(mesh, np.ascontiguousarray(gx), np.ascontiguousarray(gy), 0.5 * det,
                   np.ascontiguousarray(lam), lam_c, rows, cols)

    def evaluate(self, u: np.ndarray, hessian: bool = True):
        return kernels.assemble(np.ascontiguousarray(u, dtype=float), self.mesh.triangles,
                                self.gx, self.gy, self.area, self.lam, QUAD_WEIGHTS, hessian)

    def matrix(self, hess: np.ndarray) -> sp.csr_matrix:
        n = self.mesh.n_nodes
        return sp.csr_matrix((hess.ravel(), (self.rows, self.cols)), shape=(n, n))

    def gradients(self, u: np.ndarray) -> np.ndarray:
        ut = u[self.mesh.triangles]
        return np.stack([np.einsum("ij,ij->i", self.gx, ut), np.einsum("ij,ij->i", self.gy, ut)], axis=1)


# ---------------------------------------------------------------------------
# boundary data


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Dirichlet values on the boundary nodes ``0 .. n_boundary-1``."""

    values: np.ndarray
    description: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("boundary values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, mesh: TriMesh, c: float) -> "BoundaryData":
        return cls(np.full(mesh.n_boundary, float(c)), {"kind": "constant", "value": float(c)})

    @classmethod
    def from_function(cls, mesh: TriMesh, f) -> "BoundaryData":
        return cls(np.asarray(f(mesh.z[:mesh.n_boundary]), dtype=float), {"kind": "function"})

    @classmethod
    def from_sides(cls, mesh: TriMesh, side_values) -> "BoundaryData":
        """Constant value per polygon side, linear in arclength along chords."""
        dom = mesh.domain
        if dom is None:
            raise ValueError("mesh has no truncated domain attached")
        n = dom.n
        vals = np.empty(mesh.n_boundary)
        z = mesh.z
        for arc in dom.arcs:
            nodes = mesh.arc_nodes(arc.marker)[:-1]
            if arc.kind == "chord":
                lo, hi = side_values[(arc.index - 1) % n], side_values[arc.index]
                t = _arc_fraction(arc, z[nodes])
                vals[nodes] = lo + (hi - lo) * t
            else:
                vals[nodes] = side_values[arc.index]
        return cls(vals, {"kind": "sides", "side_values": [float(v) for v in side_values]})

    @classmethod
    def scherk(cls, mesh: TriMesh, n: float, variant: str = "symmetric") -> "BoundaryData":
        """``+n`` on A-sides and ``-n`` (``variant="symmetric"``) or ``0``
        (``variant="n0"``) on B-sides."""
        if variant not in ("symmetric", "n0"):
            raise ValueError(f"unknown variant {variant!r}")
        G = mesh.domain.parent
        low = -n if variant == "symmetric" else 0.0
        bd = cls.from_sides(mesh, [n if G.label(i) == "A" else low for i in range(G.n)])
        bd.description.update({"kind": "scherk", "n": float(n), "variant": variant})
        return bd


def _arc_fraction(arc, z) -> np.ndarray:
    L = arc.length
    return np.clip(hyperbolic_distances(arc.start, z) / L, 0.0, 1.0)


# ---------------------------------------------------------------------------
# solutions


@dataclass(eq=False)
class Solution:
    mesh: TriMesh
    u: np.ndarray
    bc: BoundaryData
    energy: float
    residual: float
    iterations: int
    converged: bool
    energy_history: list
    offset: float = 0.0
    reactions: np.ndarray | None = None
    flux_vectors: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    _asm: Assembly | None = field(default=None, repr=False)

    @property
    def assembly(self) -> Assembly:
        if self._asm is None:
            self._asm = Assembly.build(self.mesh)
        return self._asm

    def gradients(self) -> np.ndarray:
        """Euclidean gradient of ``u`` per triangle, (M, 2)."""
        return self.assembly.gradients(self.u)

    def hyperbolic_fields(self):
        """Per-triangle ``(p, W, X)`` at the centroid, in an orthonormal frame.

        ``p`` is the hyperbolic gradient, ``W = sqrt(1 + |p|^2)`` and
        ``X = p / W``.
        """
        g = self.gradients()
        p = g / self.assembly.lam_c[:, None]
        W = np.sqrt(1.0 + np.sum(p * p, axis=1))
        return p, W, p / W[:, None]

    def shifted(self, c: float) -> "Solution":
        """The same graph translated vertically by ``-c``."""
        bc = BoundaryData(self.bc.values - c, dict(self.bc.description))
        return Solution(self.mesh, self.u - c, bc, self.energy, self.residual, self.iterations,
                        self.converged, list(self.energy_history), self.offset + c,
                        self.reactions, self.flux_vectors, dict(self.meta), self._asm)

    def at(self, z) -> np.ndarray:
        return interpolate(self.mesh, self.u, z)

    def summary(self) -> dict:
        return {"energy": self.energy, "residual": self.residual, "iterations": self.iterations,
                "converged": self.converged, "offset": self.offset,
                "n_nodes": self.mesh.n_nodes, "n_triangles": self.mesh.n_triangles, **self.meta}

    # binary file -------------------------------------------------------------

    def save(self, path, mesh_ref: str = "", extra: dict | None = None) -> None:
        meta = {"mesh_file": mesh_ref, "mesh_sha256": mesh_digest(self.mesh),
                "n_nodes": self.mesh.n_nodes, **self.summary()}
        if extra:
            meta["config"] = extra
        blob = json.dumps(meta, sort_keys=True).encode("utf-8")
        head = b"SCHERKU\0" + struct.pack("<II", 1, len(blob)) + blob
        head += b"\0" * (-len(head) % 8)
        with open(path, "wb") as fh:
            fh.write(head)
            fh.write(np.ascontiguousarray(self.u, dtype="<f8").tobytes())


def mesh_digest(mesh: TriMesh) -> str:
    return hashlib.sha256(mesh.to_text().encode("ascii")).hexdigest()


def read_solution(path) -> tuple:
    """``(metadata, u)`` from a solution file."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != b"SCHERKU\0":
        raise ValueError(f"{path}: not a solution file")
    version, n = struct.unpack("<II", data[8:16])
    if version != 1:
        raise ValueError(f"{path}: unsupported version {version}")
    meta = json.loads(data[16:16 + n].decode("utf-8"))
    start = 16 + n + (-(16 + n) % 8)
    u = np.frombuffer(data[start:], dtype="<f8").copy()
    if u.size != meta["n_nodes"]:
        raise ValueError(f"{path}: truncated nodal array")
    return meta, u


# ---------------------------------------------------------------------------
# point location


def locate(mesh: TriMesh, z) -> tuple:
    """Triangle index and barycentric coordinates for each point (``-1`` outside)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    p = mesh.nodes[mesh.triangles]
    x0, y0 = p[:, 0, 0], p[:, 0, 1]
    x1, y1 = p[:, 1, 0] - x0, p[:, 1, 1] - y0
    x2, y2 = p[:, 2, 0] - x0, p[:, 2, 1] - y0
    det = x1 * y2 - x2 * y1
    tri = np.full(z.shape, -1, dtype=np.int64)
    bary = np.zeros(z.shape + (3,))
    for k, w in enumerate(z):
        dx, dy = w.real - x0, w.imag - y0
        l1 = (dx * y2 - dy * x2) / det
        l2 = (x1 * dy - y1 * dx) / det
        l0 = 1.0 - l1 - l2
        inside = np.minimum(np.minimum(l0, l1), l2)
        j = int(np.argmax(inside))
        if inside[j] >= -1e-12:
            tri[k] = j
            bary[k] = (l0[j], l1[j], l2[j])
    return tri, bary


def interpolate(mesh: TriMesh, u: np.ndarray, z) -> np.ndarray:
    """P1 interpolation of nodal values at points (NaN outside the mesh)."""
    tri, bary = locate(mesh, z)
    out = np.full(tri.shape, np.nan)
    ok = tri >= 0
    out[ok] = np.sum(u[mesh.triangles[tri[ok]]] * bary[ok], axis=1)
    return out


# ---------------------------------------------------------------------------
# Newton


def _solve_linear(K: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    try:
        x = spla.spsolve(K.tocsc(), rhs)
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("singular Newton system")
    return x


def solve(mesh: TriMesh, bc: BoundaryData, *, tol: float = TOL_SOLVE, max_iter: int = MAX_ITER,
          u0: np.ndarray | None = None) -> Solution:
    """Minimize the discrete area functional with Dirichlet data ``bc``."""
    asm = Assembly.build(mesh)
    nb = mesh.n_boundary
    if bc.values.shape != (nb,):
        raise ValueError(f"boundary data has {bc.values.shape} values, mesh has {nb} boundary nodes")
    free = mesh.interior
    u = np.zeros(mesh.n_nodes)
    u[:nb] = bc.values
    energy, grad, hess, _ = asm.evaluate(u)
    if u0 is not None:
        u[free] = np.asarray(u0, dtype=float)[free]
    elif free.size:
        # harmonic extension: the Hessian at zero gradient is the Laplacian
        _, _, lap, _ = asm.evaluate(np.zeros(mesh.n_nodes))
        L = asm.matrix(lap)
        rhs = -(L[free][:, :nb] @ u[:nb])
        u[free] = _solve_linear(L[free][:, free], rhs)
    energy, grad, hess, flux = asm.evaluate(u)
    history = [energy]
    it = 0
    converged = False
    while True:
        res = float(np.linalg.norm(grad[free]))
        if res <= tol * (1.0 + abs(energy)) or free.size == 0:
            converged = True
            break
        if it >= max_iter:
            break
        K = asm.matrix(hess)[free][:, free]
        du = -_solve_linear(K, grad[free])
        slope = float(grad[free] @ du)
        step = 1.0
        accepted = False
        while step > 1e-12:
            trial = u.copy()
            trial[free] += step * du
            e_t, g_t, h_t, f_t = asm.evaluate(trial)
            flat = abs(e_t - energy) <= 1e-13 * (1.0 + abs(energy))
            if e_t <= energy + 1e-4 * step * slope or (
                    flat and np.linalg.norm(g_t[free]) < res):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        # round-off may let a flat step raise the energy by an ulp; keep the lower value
        u, grad, hess, flux = trial, g_t, h_t, f_t
        energy = min(e_t, energy) if flat else e_t
        history.append(e_t)
        it += 1
    if not converged:
        raise NonConvergence(f"residual {res:.3e} after {it} Newton steps")
    energy, grad, _, flux = asm.evaluate(u, hessian=False)
    return Solution(mesh, u, bc, energy, res, it, True, history, 0.0,
                    grad.copy(), flux, {}, asm)


# ---------------------------------------------------------------------------
# barrier


def barrier_h(x, y):
    """``ln((sqrt(x^2 + y^2) + y) / x)`` on the quadrant ``x, y > 0`` of the half-plane."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("barrier is defined for x > 0 and y > 0 only")
    r = np.hypot(x, y)
    out = np.log((r + y) / x)
    return float(out) if out.ndim == 0 else out


def barrier_gradient(x, y):
    """Hyperbolic gradient of the barrier in half-plane coordinates.

    Returns ``(gx, gy, norm)``: the vector ``y^2 grad_e h`` and its
    hyperbolic length ``y |grad_e h|``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("barrier is defined for x > 0 and y > 0 only")
    r = np.hypot(x, y)
    hx = x / (r * (r + y)) - 1.0 / x
    hy = 1.0 / r
    return y * y * hx, y * y * hy, y * np.hypot(hx, hy)


def barrier_on_disk(z):
    """Barrier evaluated at disk points through the Cayley map."""
    w = cayley(np.asarray(z, dtype=complex))
    return barrier_h(np.real(w), np.imag(w))


def halfplane_rectangle_mesh(x0: float, x1: float, y0: float, y1: float, cells: int) -> TriMesh:
    """Structured mesh of a half-plane rectangle, mapped to the disk.

    Each grid cell is cut along its rising diagonal.  All boundary nodes
    carry marker 1.  ``h`` is set to the largest hyperbolic edge length.
    """
    if not (0 < y0 < y1 and x0 < x1) or cells < 1:
        raise ValueError("invalid rectangle")
    n = cells
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    # boundary loop: left edge up, top, right edge down, bottom
    loop = ([(0, j) for j in range(n)] + [(i, n) for i in range(n)]
            + [(n, j) for j in range(n, 0, -1)] + [(i, 0) for i in range(n, 0, -1)])
    index = {}
    pts = []
    for ij in loop:
        index[ij] = len(pts)
        pts.append(complex(xs[ij[0]], ys[ij[1]]))
    for j in range(1, n):
        for i in range(1, n):
            index[(i, j)] = len(pts)
            pts.append(complex(xs[i], ys[j]))
    tris = []
    for j in range(n):
        for i in range(n):
            a, b, d, e = index[(i, j)], index[(i + 1, j)], index[(i + 1, j + 1)], index[(i, j + 1)]
            tris += [(a, b, d), (a, d, e)]
    z = inverse_cayley(np.array(pts))
    nodes = np.stack([z.real, z.imag], axis=1)
    markers = np.zeros(len(pts), dtype=np.int64)
    markers[:len(loop)] = 1
    mesh = TriMesh(nodes, np.array(tris, dtype=np.int64), markers, len(loop))
    mesh.h = float(mesh.edge_lengths().max())
    return mesh


# ---------------------------------------------------------------------------
# Scherk sequences


def level_for(n: float) -> int:
    """Truncation level paired with the cap value: ``ceil(log2 n) + 2``."""
    return int(math.ceil(math.log2(max(n, 1.0)))) + 2


def _pool_map(fn, items):
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with cf.ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def scherk_sequence(G: ScherkPolygon, n_list, O=ORIGIN, *, h: float = DEFAULT_H,
                    grading: float = DEFAULT_GRADING, variant: str = "symmetric",
                    level: int | None = None, check: bool = True) -> list:
    """Solutions with cap values ``n`` on the truncated domains, anchored at ``O``.

    Parameters
    ----------
    G : ScherkPolygon
    n_list : sequence of float
        Increasing cap values.
    O : point
        Base point; every solution is shifted so that ``u(O) = 0``.
    level : int, optional
        Fixed truncation level shared by all ``n`` (one mesh).  By default
        each ``n`` uses ``level_for(n)``.
    check : bool
        Refuse polygons that fail the admissibility check.
    """
    n_list = [float(v) for v in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    if check:
        rep = check_admissibility(G, "auto")
        if not rep.admissible:
            raise NotAdmissible(f"polygon is not admissible ({rep.status})")
    zO = _as_complex(O)
    meshes = {}

    def mesh_for(lv):
        if lv not in meshes:
            meshes[lv] = triangulate(truncate(G, lv), h, grading)
        return meshes[lv]

    levels = [level if level is not None else level_for(n) for n in n_list]
    for lv in sorted(set(levels)):
        mesh_for(lv)

    def run(args):
        n, lv = args
        mesh = meshes[lv]
        sol = solve(mesh, BoundaryData.scherk(mesh, n, variant))
        c = float(sol.at(zO)[0])
        if not math.isfinite(c):
            raise GeometryError("base point lies outside the truncated domain")
        out = sol.shifted(c)
        out.meta.update({"n": n, "level": lv, "variant": variant, "h": h, "grading": grading})
        return out

    return _pool_map(run, list(zip(n_list, levels)))


# ---------------------------------------------------------------------------
# divergence probe


@dataclass
class FittedGeodesic:
    endpoints: tuple  # angles of the two ideal endpoints
    residual: float  # rms deviation of the interface from equidistance to the fit
    vertices: tuple  # nearest polygon vertex index per endpoint
    vertex_errors: tuple  # angular distance to those vertices
    n_points: int
    offset: float = 0.0  # mean hyperbolic distance of the interface to the geodesic
    n_vertices: int = 0  # vertex count of the polygon, for the side test

    @property
    def is_side(self) -> bool:
        """Both ends snap to consecutive polygon vertices."""
        if self.n_vertices == 0 or len(self.vertices) != 2:
            return False
        i, j = self.vertices
        return (i - j) % self.n_vertices in (1, self.n_vertices - 1)

    def to_dict(self) -> dict:
        return {"endpoints_rad": list(self.endpoints), "fit_residual": self.residual,
                "offset": self.offset, "vertices": list(self.vertices),
                "vertex_errors_rad": list(self.vertex_errors), "n_points": self.n_points,
                "is_side": self.is_side}


@dataclass
class DivergenceReport:
    threshold: float
    marked: np.ndarray  # node indices of the last mesh
    sign: int  # +1 when the marked region escapes upwards
    geodesics: list
    max_growth: float

    @property
    def empty(self) -> bool:
        return self.marked.size == 0

    def shared_vertices(self, interior_only: bool = False) -> list:
        """Polygon vertices reached by more than one fitted geodesic."""
        seen = {}
        for g in self.geodesics:
            if interior_only and g.is_side:
                continue
            for v in set(g.vertices):
                seen[v] = seen.get(v, 0) + 1
        return sorted(v for v, c in seen.items() if c > 1)

    def max_vertex_error(self) -> float:
        errs = [e for g in self.geodesics for e in g.vertex_errors]
        return max(errs) if errs else 0.0

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "n_marked": int(self.marked.size),
                "sign": self.sign, "max_growth": self.max_growth,
                "geodesics": [g.to_dict() for g in self.geodesics],
                "shared_vertices": self.shared_vertices()}


def fit_geodesic(z: np.ndarray) -> tuple:
    """Least-squares geodesic through disk points; returns its two ideal endpoints.

    Geodesics are the circles ``a(x^2 + y^2 + 1) - 2bx - 2cy = 0`` (lines
    through 0 when ``a = 0``); the coefficients are the smallest singular
    vector of the design matrix.
    """
    z = np.asarray(z, dtype=complex)
    A = np.stack([np.abs(z) ** 2 + 1.0, -2.0 * z.real, -2.0 * z.imag], axis=1)
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    _, _, vt = np.linalg.svd(A)
    a, b, c = vt[-1]
    if abs(a) < 1e-12:
        u = complex(c, -b)
        u /= abs(u)
        return u, -u
    centre = complex(b, c) / a
    rad2 = abs(centre) ** 2 - 1.0
    if rad2 <= 0:
        raise GeometryError("fitted circle is not orthogonal to the boundary")
    # intersection of |w| = 1 with |w - centre| = r: points at angle +-acos(1/|centre|)
    phi = math.atan2(centre.imag, centre.real)
    half = math.acos(1.0 / abs(centre))
    return complex(math.cos(phi + half), math.sin(phi + half)), complex(math.cos(phi - half), math.sin(phi - half))


def fit_equidistant(z: np.ndarray) -> tuple:
    """Least-squares circle through disk points and its two ideal endpoints.

    A curve at constant distance from a geodesic is a circle arc through the
    geodesic's two ideal endpoints, so fitting a general circle
    ``a |z|^2 - 2bx - 2cy + d = 0`` and intersecting it with ``|z| = 1``
    recovers the geodesic from one of its equidistant curves.  Raises
    ``GeometryError`` when the fitted circle misses the unit circle.
    """
    z = np.asarray(z, dtype=complex)
    A = np.stack([np.abs(z) ** 2, -2.0 * z.real, -2.0 * z.imag, np.ones(z.size)], axis=1)
    scale = np.linalg.norm(A, axis=1, keepdims=True)
    _, _, vt = np.linalg.svd(A / scale)
    a, b, c, d = vt[-1]
    # on |z| = 1 the circle equation is the line  b x + c y = (a + d) / 2
    nrm = math.hypot(b, c)
    if nrm < 1e-14:
        raise GeometryError("fitted circle is concentric with the boundary")
    rho = 0.5 * (a + d) / nrm
    if abs(rho) >= 1.0:
        raise GeometryError("fitted circle does not reach the boundary")
    phi = math.atan2(c, b)
    half = math.acos(rho)
    return (complex(math.cos(phi + half), math.sin(phi + half)),
            complex(math.cos(phi - half), math.sin(phi - half)))


def _level_crossings(mesh: TriMesh, f: np.ndarray, level: float, keep: np.ndarray) -> np.ndarray:
    """Points where the P1 function ``f`` crosses ``level`` on mesh edges with both ends kept."""
    tri = mesh.triangles
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    e = np.unique(np.sort(e, axis=1), axis=0)
    e = e[keep[e[:, 0]] & keep[e[:, 1]]]
    fa, fb = f[e[:, 0]] - level, f[e[:, 1]] - level
    cross = fa * fb < 0
    e, fa, fb = e[cross], fa[cross], fb[cross]
    t = fa / (fa - fb)
    z = mesh.z
    return z[e[:, 0]] + t * (z[e[:, 1]] - z[e[:, 0]])


def _components(points: np.ndarray, link: float) -> list:
    """Single-linkage clusters of points under hyperbolic distance ``link``."""
    n = points.size
    if n == 0:
        return []
    rows, cols = [], []
    for i in range(n):
        d = hyperbolic_distances(points[i], points)
        j = np.flatnonzero(d < link)
        rows.extend([i] * j.size)
        cols.extend(j.tolist())
    g = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, lab = sp.csgraph.connected_components(g, directed=False)
    return [points[lab == k] for k in range(lab.max() + 1)]


def _fit_interface(points: np.ndarray):
    """``(endpoint angles, rms deviation from equidistance, mean offset)`` or None."""
    try:
        e1, e2 = fit_equidistant(points)
    except GeometryError:
        return None
    dist = distance_to_geodesic(points, e1, e2)
    res = float(np.sqrt(np.mean((dist - dist.mean()) ** 2)))
    ends = tuple(float(np.angle(e) % (2 * math.pi)) for e in (e1, e2))
    return ends, res, float(dist.mean())


def _merge_cocircular(clusters: list, tol: float = 0.02) -> list:
    """Join clusters that lie on one equidistant curve.

    An interface that thins out below the mesh resolution shows up as
    several clusters; two clusters are joined when the fit of their union
    deviates from equidistance by at most ``tol`` more than the worse of the
    two separate fits.
    """
    clusters = list(clusters)
    merged = True
    while merged and len(clusters) > 1:
        merged = False
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                fi, fj = _fit_interface(clusters[i]), _fit_interface(clusters[j])
                union = np.concatenate([clusters[i], clusters[j]])
                fu = _fit_interface(union)
                if fi is None or fj is None or fu is None:
                    continue
                if fu[1] <= max(fi[1], fj[1]) + tol:
                    clusters[i] = union
                    del clusters[j]
                    merged = True
                    break
            if merged:
                break
    return clusters


def _core_nodes(mesh: TriMesh, prev: TriMesh) -> np.ndarray:
    """Interior nodes of ``mesh`` away from the cusp collars of ``prev``.

    A node qualifies when it lies in the truncated domain one level below
    that of ``prev`` (so the old chords and their interpolated data are
    excluded) and is covered by ``prev``.
    """
    keep = np.zeros(mesh.n_nodes, dtype=bool)
    keep[mesh.n_boundary:] = True
    pd = prev.domain
    if pd is not None:
        base = pd.decoration.scaled(2.0 ** pd.level)
        core = truncate(pd.parent, max(pd.level - 1, 0), base)
        keep &= core.contains(mesh.z)
    return keep


DIVERGENCE_FACTOR = 1.5


def divergence_probe(seq: list, threshold: float | None = None, *,
                     min_points: int = 16) -> DivergenceReport:
    """Locate where the last two anchored solutions drift apart.

    The growth ``u_last - u_prev`` is evaluated at interior nodes of the
    last mesh, away from the cusp collars of the previous domain.  Nodes
    whose growth (with the sign of the larger excursion) exceeds
    ``threshold`` are marked.  The default threshold is
    ``DIVERGENCE_FACTOR`` times the cap increment ``n_last - n_prev``.  When
    both side families escape at the cap rate and the anchor does not move,
    the comparison principle keeps the growth below the cap increment, so a
    clear excess flags a region escaping faster than its boundary data.  The
    margin absorbs the drift of the anchor value that mesh asymmetry causes
    for balanced polygons.  Sequences on one shared mesh (``level=`` in
    ``scherk_sequence``) are the intended input.

    The crossings of the threshold along mesh edges are split into
    clusters, and each cluster is fitted by a circle whose two ideal
    endpoints define the boundary geodesic of the region.  The endpoints are
    snapped to the nearest polygon vertex.
    """
    if len(seq) < 2:
        raise ValueError("need at least two solutions")
    last, prev = seq[-1], seq[-2]
    if threshold is None:
        threshold = DIVERGENCE_FACTOR * (float(last.meta["n"]) - float(prev.meta["n"]))
    mesh = last.mesh
    z = mesh.z
    growth = last.u - interpolate(prev.mesh, prev.u, z)
    valid = np.isfinite(growth) & _core_nodes(mesh, prev.mesh)
    growth = np.where(valid, growth, 0.0)
    hi, lo = float(np.max(growth)), float(np.min(growth))
    sign = 1 if hi >= -lo else -1
    g = sign * growth
    marked = np.flatnonzero(valid & (g > threshold))
    geodesics = []
    if marked.size:
        pts = _level_crossings(mesh, g, threshold, valid)
        link = 4.0 * (mesh.h if math.isfinite(mesh.h) else 0.25)
        clusters = [c for c in _components(pts, link) if c.size >= min_points]
        verts = mesh.domain.parent.angles if mesh.domain is not None else []
        for cluster in _merge_cocircular(clusters):
            fit = _fit_interface(cluster)
            if fit is None:
                continue
            ends, res, off = fit
            near, errs = [], []
            for t in ends:
                if verts:
                    d = [abs((t - v + math.pi) % (2 * math.pi) - math.pi) for v in verts]
                    j = int(np.argmin(d))
                    near.append(j)
                    errs.append(float(d[j]))
            geodesics.append(FittedGeodesic(ends, res, tuple(near), tuple(errs), int(cluster.size),
                                            off, len(verts)))
    return DivergenceReport(threshold, marked, sign, geodesics, max(hi, -lo))


__all__ = ["BoundaryData", "Solution", "solve", "barrier_h", "barrier_gradient", "barrier_on_disk",
           "halfplane_rectangle_mesh", "scherk_sequence", "divergence_probe", "DivergenceReport",
           "fit_geodesic", "fit_equidistant", "DIVERGENCE_FACTOR", "interpolate", "locate", "read_solution", "NonConvergence",
           "SingularSystem", "NotAdmissible", "DomainError", "level_for", "thread_count",
           "InteriorPoint"]
