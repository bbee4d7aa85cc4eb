"""Ideal Scherk polygons and the exact admissibility decision.

A ``ScherkPolygon`` lists its ideal vertices clockwise.  Edge ``[d_i, d_{i+1}]``
carries the label of ``first_edge`` for even ``i`` and the other label for odd
``i``; A-sides take the value +oo and B-sides -oo.

Admissibility reduces to finitely many decoration-independent margins: only
inscribed polygons whose A-sides (resp. B-sides) pair up all of their
vertices need checking, and for those ``|P| - 2a(P)`` (resp. ``|P| - 2b(P)``)
does not depend on the horocycles.  Every other inscribed polygon satisfies
its inequality once the horocycles are small enough.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .hypgeo import (EPS_GEO, TWO_PI, BoundaryPoint, CoincidentPoints, Decoration,
                     GeometryError, truncated_distance)

MAX_ENUM_VERTICES = 24
MARGIN_TOL = 1e-10
BALANCE_TOL = 1e-10

BOUNDARY_A = "boundary-A"
BOUNDARY_B = "boundary-B"
INTERIOR = "interior"


class PolygonError(GeometryError):
    pass


class TooLarge(PolygonError):
    pass


class MissingDecoration(PolygonError):
    pass


class PolygonSpecError(PolygonError):
    pass


def _other(label: str) -> str:
    return "B" if label == "A" else "A"


@dataclass(frozen=True, eq=False)
class ScherkPolygon:
    vertices: tuple
    first_edge: str = "A"

    def __post_init__(self):
        verts = tuple(v if isinstance(v, BoundaryPoint) else BoundaryPoint(float(v))
                      for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        n = len(verts)
        if n < 4 or n % 2:
            raise PolygonError(f"a Scherk polygon needs an even number >= 4 of vertices, got {n}")
        if self.first_edge not in ("A", "B"):
            raise PolygonError(f"first_edge must be 'A' or 'B', got {self.first_edge!r}")
        gaps = [(verts[i].theta - verts[(i + 1) % n].theta) % TWO_PI for i in range(n)]
        if min(gaps) <= EPS_GEO or abs(sum(gaps) - TWO_PI) > 1e-9:
            raise PolygonError("vertices must be distinct and strictly clockwise")

    @classmethod
    def from_angles(cls, angles: Sequence[float], first_edge: str = "A") -> "ScherkPolygon":
        return cls(tuple(BoundaryPoint(a) for a in angles), first_edge)

    @classmethod
    def regular(cls, n: int, rotation: float = 0.0, first_edge: str = "A") -> "ScherkPolygon":
        """Vertices at angles ``rotation - 2 pi j / n`` (clockwise)."""
        return cls.from_angles([rotation - TWO_PI * j / n for j in range(n)], first_edge)

    def __len__(self):
        return len(self.vertices)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def k(self) -> int:
        return len(self.vertices) // 2

    @property
    def angles(self) -> list:
        return [v.theta for v in self.vertices]

    @property
    def points(self) -> np.ndarray:
        return np.array([v.z for v in self.vertices])

    @property
    def a_offset(self) -> int:
        """Index parity of A-sides: 0 if ``[d_0, d_1]`` is an A-side."""
        return 0 if self.first_edge == "A" else 1

    def label(self, i: int) -> str:
        """Label of edge ``[d_i, d_{i+1}]``."""
        return self.first_edge if i % 2 == 0 else _other(self.first_edge)

    def sides(self, label: str) -> list:
        """Index pairs ``(i, i+1)`` of the sides carrying ``label``."""
        n = self.n
        return [(i, (i + 1) % n) for i in range(n) if self.label(i) == label]

    def lengths(self, dec: Decoration | None = None) -> np.ndarray:
        """Matrix of truncated lengths ``|d_i d_j|``."""
        z = self.points
        sizes = np.ones(self.n) if dec is None else np.asarray(dec.sizes)
        if len(sizes) != self.n:
            raise MissingDecoration(f"decoration has {len(sizes)} sizes for {self.n} vertices")
        d2 = np.abs(z[:, None] - z[None, :]) ** 2
        np.fill_diagonal(d2, 1.0)
        L = np.log(d2 / np.outer(sizes, sizes))
        np.fill_diagonal(L, 0.0)
        return np.ascontiguousarray(L)

    def transformed(self, m) -> "ScherkPolygon":
        """Image under a disk isometry; reflections reverse the vertex order."""
        img = [m.apply(v) for v in self.vertices]
        if m.reflect:
            # keep clockwise order: reverse and keep edge [d_0, d_1] first
            img = [img[0]] + img[:0:-1]
            # new edge 0 is the old edge [d_{n-1}, d_0]
            return ScherkPolygon(tuple(img), self.label(self.n - 1))
        return ScherkPolygon(tuple(img), self.first_edge)

    # JSON polygon spec -----------------------------------------------------

    def to_spec(self) -> dict:
        return {"vertices_rad": [float(a) for a in self.angles], "first_edge": self.first_edge}

    @classmethod
    def from_spec(cls, spec: dict) -> "ScherkPolygon":
        try:
            angles = spec["vertices_rad"]
            first = spec.get("first_edge", "A")
            if not isinstance(angles, list) or not all(isinstance(a, (int, float)) for a in angles):
                raise PolygonSpecError("vertices_rad must be a list of numbers")
            return cls.from_angles([float(a) for a in angles], first)
        except (KeyError, TypeError) as exc:
            raise PolygonSpecError(f"malformed polygon spec: {exc}") from exc
        except PolygonSpecError:
            raise
        except PolygonError as exc:
            raise PolygonSpecError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ScherkPolygon":
        with open(path) as fh:
            try:
                spec = json.load(fh)
            except json.JSONDecodeError as exc:
                raise PolygonSpecError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(spec, dict):
            raise PolygonSpecError(f"{path}: expected a JSON object")
        return cls.from_spec(spec)

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_spec(), fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True)
class InscribedPolygon:
    parent: ScherkPolygon = field(repr=False)
    indices: tuple
    edge_classes: tuple

    @classmethod
    def from_indices(cls, parent: ScherkPolygon, indices: Sequence[int]) -> "InscribedPolygon":
        idx = tuple(sorted(int(i) for i in indices))
        n = parent.n
        if len(idx) < 3 or len(set(idx)) != len(idx) or idx[0] < 0 or idx[-1] >= n:
            raise PolygonError(f"invalid inscribed vertex set {indices}")
        classes = []
        for p, q in zip(idx, idx[1:] + idx[:1]):
            if (q - p) % n == 1:
                classes.append(BOUNDARY_A if parent.label(p) == "A" else BOUNDARY_B)
            else:
                classes.append(INTERIOR)
        return cls(parent, idx, tuple(classes))

    @classmethod
    def from_mask(cls, parent: ScherkPolygon, mask: int) -> "InscribedPolygon":
        return cls.from_indices(parent, [i for i in range(parent.n) if mask >> i & 1])

    @property
    def mask(self) -> int:
        return sum(1 << i for i in self.indices)

    @property
    def edges(self) -> list:
        return list(zip(self.indices, self.indices[1:] + self.indices[:1]))

    def __len__(self):
        return len(self.indices)


def quantities(P: InscribedPolygon, dec: Decoration | None = None) -> tuple:
    """``(a(P), b(P), |P|)`` at the decoration ``dec`` (unit sizes by default)."""
    G = P.parent
    if dec is not None and len(dec) != G.n:
        raise MissingDecoration(f"decoration has {len(dec)} sizes for {G.n} vertices")
    a = b = perim = 0.0
    for (p, q), cls in zip(P.edges, P.edge_classes):
        sp = 1.0 if dec is None else dec[p]
        sq = 1.0 if dec is None else dec[q]
        ell = truncated_distance(G.vertices[p], G.vertices[q], sp, sq)
        perim += ell
        if cls == BOUNDARY_A:
            a += ell
        elif cls == BOUNDARY_B:
            b += ell
    return a, b, perim


def gamma_balance(G: ScherkPolygon, dec: Decoration | None = None) -> float:
    """``a(Gamma) - b(Gamma)``; independent of the decoration."""
    L = G.lengths(dec)
    n = G.n
    return float(sum((1.0 if G.label(i) == "A" else -1.0) * L[i, (i + 1) % n] for i in range(n)))


def _guard(G: ScherkPolygon) -> None:
    if G.n > MAX_ENUM_VERTICES:
        raise TooLarge(f"{G.n} vertices exceeds the enumeration guard of {MAX_ENUM_VERTICES}")


def enumerate_inscribed(G: ScherkPolygon) -> Iterator[InscribedPolygon]:
    """Every inscribed polygon other than ``G`` itself, ordered by index tuple."""
    _guard(G)
    n = G.n
    from itertools import combinations
    subsets = []
    for size in range(3, n):
        subsets.extend(combinations(range(n), size))
    subsets.sort()
    for idx in subsets:
        yield InscribedPolygon.from_indices(G, idx)


def is_alternating(P: InscribedPolygon, side: str) -> bool:
    """Every vertex of ``P`` meets exactly one boundary edge of the given side."""
    want = BOUNDARY_A if side == "A" else BOUNDARY_B
    m = len(P.indices)
    hits = [0] * m
    for j, cls in enumerate(P.edge_classes):
        if cls == want:
            hits[j] += 1
            hits[(j + 1) % m] += 1
    return all(h == 1 for h in hits)


def margin(P: InscribedPolygon, side: str, dec: Decoration | None = None) -> float:
    """``|P| - 2a(P)`` (side A) or ``|P| - 2b(P)`` (side B)."""
    a, b, perim = quantities(P, dec)
    return perim - 2.0 * (a if side == "A" else b)


def phi(a0, b1, b2, a1, dec: Sequence[float] | None = None) -> float:
    """``|a0 a1| - |a1 b2| + |b2 b1| - |b1 a0|``; independent of the horocycles."""
    s = (1.0, 1.0, 1.0, 1.0) if dec is None else tuple(dec)
    return (truncated_distance(a0, a1, s[0], s[3]) - truncated_distance(a1, b2, s[3], s[2])
            + truncated_distance(b2, b1, s[2], s[1]) - truncated_distance(b1, a0, s[1], s[0]))


@dataclass
class MarginEntry:
    indices: tuple
    side: str
    margin: float
    kind: str  # "equality" or "violation"

    def to_dict(self) -> dict:
        return {"indices": list(self.indices), "side": self.side,
                "margin": self.margin, "kind": self.kind}


@dataclass
class AdmissibilityReport:
    n_vertices: int
    balance: float
    balanced: bool
    violations: list
    min_margin_a: float
    min_margin_b: float
    n_enumerated: int
    n_checked: int
    n_shared_interior: int
    method: str
    argmin_a: tuple = ()
    argmin_b: tuple = ()

    @property
    def margins(self) -> float:
        return min(self.min_margin_a, self.min_margin_b)

    @property
    def admissible(self) -> bool:
        return self.balanced and not self.violations

    @property
    def strict_violations(self) -> list:
        return [v for v in self.violations if v.kind == "violation"]

    @property
    def equalities(self) -> list:
        return [v for v in self.violations if v.kind == "equality"]

    @property
    def status(self) -> str:
        if self.admissible:
            return "admissible"
        if not self.balanced or self.strict_violations:
            return "violation"
        return "equality"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "admissible": self.admissible,
            "n_vertices": self.n_vertices,
            "balance": self.balance,
            "balanced": self.balanced,
            "min_margin": _finite_or_none(self.margins),
            "min_margin_A": _finite_or_none(self.min_margin_a),
            "min_margin_B": _finite_or_none(self.min_margin_b),
            "argmin_A": list(self.argmin_a),
            "argmin_B": list(self.argmin_b),
            "violations": [v.to_dict() for v in self.violations],
            "n_enumerated": self.n_enumerated,
            "n_checked": self.n_checked,
            "n_shared_interior_vertex": self.n_shared_interior,
            "method": self.method,
        }


def _finite_or_none(x):
    """JSON has no infinity; an empty minimum is written as null."""
    return None if x is None or math.isinf(x) else x


def _mask_indices(mask: int, n: int) -> tuple:
    return tuple(i for i in range(n) if mask >> i & 1)


def check_admissibility(G: ScherkPolygon, method: str = "enumerate") -> AdmissibilityReport:
    """Decide the two admissibility conditions for ``G``.

    ``method="enumerate"`` sweeps all ``2^{2k}`` vertex subsets (guarded at
    24 vertices) and lists every equality or violation.  ``method="dp"``
    minimizes the alternating margins by dynamic programming over side
    subsets and has no size guard; it reports only the minimizers.
    ``"auto"`` picks enumeration when the guard allows it.
    """
    if method == "auto":
        method = "enumerate" if G.n <= MAX_ENUM_VERTICES else "dp"
    bal = gamma_balance(G)
    balanced = abs(bal) < BALANCE_TOL
    if method == "enumerate":
        _guard(G)
        masks, sides, margins, n_enum, n_shared = kernels.scan_inscribed(G.n, G.a_offset, G.lengths())
        full = (1 << G.n) - 1
        keep = masks != full
        masks, sides, margins = masks[keep], sides[keep], margins[keep]
        entries = []
        mins = {}
        for side_code, label in ((0, "A"), (1, "B")):
            sel = sides == side_code
            if np.any(sel):
                j = int(np.argmin(np.where(sel, margins, np.inf)))
                mins[label] = (float(margins[j]), _mask_indices(int(masks[j]), G.n))
            else:
                mins[label] = (math.inf, ())
        order = np.lexsort((sides, masks))
        for j in order:
            m = float(margins[j])
            if m <= MARGIN_TOL:
                entries.append(MarginEntry(_mask_indices(int(masks[j]), G.n),
                                           "A" if sides[j] == 0 else "B", m,
                                           "equality" if m >= -MARGIN_TOL else "violation"))
        n_checked = int(masks.size)
    elif method == "dp":
        mins = {label: alternating_min_margin(G, label) for label in ("A", "B")}
        entries = []
        for label, (m, idx) in mins.items():
            if m <= MARGIN_TOL:
                entries.append(MarginEntry(idx, label, m,
                                           "equality" if m >= -MARGIN_TOL else "violation"))
        n_enum = (1 << G.n) - 1 - G.n - G.n * (G.n - 1) // 2 - 1
        n_checked = 2 * ((1 << G.k) - G.k - 2)
        n_shared = -1
    else:
        raise ValueError(f"unknown method {method!r}")
    return AdmissibilityReport(
        n_vertices=G.n, balance=bal, balanced=balanced, violations=entries,
        min_margin_a=mins["A"][0], min_margin_b=mins["B"][0],
        n_enumerated=int(n_enum), n_checked=n_checked, n_shared_interior=int(n_shared),
        method=method, argmin_a=mins["A"][1], argmin_b=mins["B"][1])


def alternating_min_margin(G: ScherkPolygon, side: str) -> tuple:
    """Minimum of ``|P| - 2x(P)`` over x-alternating inscribed ``P != G``.

    An x-alternating polygon is exactly a union of at least two x-sides of
    ``G``, so its margin is a cyclic sum over consecutive chosen sides of
    (connector length - side length).  Minimum cyclic subsequence by
    dynamic programming, ``O(k^3)``.  Returns ``(margin, vertex indices)``.
    """
    n, k = G.n, G.k
    L = G.lengths()
    sides = G.sides(side)
    side_len = np.array([L[s, e] for s, e in sides])
    ends = np.array([e for _, e in sides])
    starts = np.array([s for s, _ in sides])
    # w[i, j]: cost of going from chosen side i to chosen side j
    w = L[np.ix_(ends, starts)] - side_len[:, None]
    best = math.inf
    best_path = None
    for f in range(k):
        # cost[j, flag] of a path f -> ... -> j; flag records a skipped side
        cost = np.full((k, 2), math.inf)
        prev = np.full((k, 2, 2), -1, dtype=int)
        js = np.arange(f + 1, k)
        if f + 1 < k:
            cost[f + 1, 0] = w[f, f + 1]
        cost[js[1:], 1] = w[f, js[1:]]
        prev[js, :, 0] = f
        prev[js, :, 1] = -1
        for i in range(f + 1, k - 1):
            tgt = np.arange(i + 1, k)
            for fl in (0, 1):
                c = cost[i, fl]
                if c == math.inf:
                    continue
                for nf, sel in ((fl, tgt == i + 1), (1, tgt > i + 1)):
                    jj = tgt[sel]
                    cand = c + w[i, jj]
                    better = cand < cost[jj, nf]
                    jj = jj[better]
                    cost[jj, nf] = cand[better]
                    prev[jj, nf, 0] = i
                    prev[jj, nf, 1] = fl
        for j in range(f + 1, k):
            for fl in (0, 1):
                if cost[j, fl] == math.inf:
                    continue
                skipped = fl or f > 0 or j < k - 1
                total = cost[j, fl] + w[j, f]
                if skipped and total < best:
                    best = total
                    path = [j]
                    i, cf = j, fl
                    while True:
                        pi, pf = prev[i, cf]
                        if pf == -1:
                            break
                        path.append(int(pi))
                        i, cf = int(pi), int(pf)
                    path.append(f)
                    best_path = sorted(path)
    if best_path is None:
        return math.inf, ()
    verts = sorted({v for s in best_path for v in sides[s]})
    return float(best), tuple(verts)
