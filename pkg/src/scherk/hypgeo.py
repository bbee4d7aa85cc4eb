"""Hyperbolic plane kernel in the Poincare disk and upper half-plane models.

Ideal points are stored as angles on the unit circle, interior points as
disk coordinates.  Horocycle decorations use the size parameter ``sigma``
for which the truncated length of the geodesic between decorated ideal
points ``p`` and ``q`` is ``ln(|p - q|**2 / (sigma_p * sigma_q))``.  In the
half-plane, after a Cayley transform whose boundary derivative has modulus
one at the vertex, ``sigma`` is the Euclidean diameter of the horocycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

EPS_GEO = 1e-12
TWO_PI = 2.0 * math.pi
SQRT2 = math.sqrt(2.0)
# tan(beta/2) = REGULAR_RATIO * tan(gamma/2) for a symmetric regular quadrilateral
REGULAR_RATIO = 3.0 - 2.0 * SQRT2


class GeometryError(ValueError):
    pass


class CoincidentPoints(GeometryError):
    pass


class DegenerateSide(GeometryError):
    pass


def normalize_angle(theta: float) -> float:
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    if t >= TWO_PI:
        t = 0.0
    return t


def angle_gap(theta: float, phi: float) -> float:
    """Signed angle from ``theta`` to ``phi`` wrapped into (-pi, pi]."""
    d = math.remainder(phi - theta, TWO_PI)
    if d == -math.pi:
        d = math.pi
    return d


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    """A point of the circle at infinity, identified by its angle."""

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @classmethod
    def from_complex(cls, z: complex) -> "BoundaryPoint":
        return cls(math.atan2(z.imag, z.real))

    @property
    def z(self) -> complex:
        return complex(math.cos(self.theta), math.sin(self.theta))

    def __eq__(self, other):
        if not isinstance(other, BoundaryPoint):
            return NotImplemented
        return abs(angle_gap(self.theta, other.theta)) <= EPS_GEO

    __hash__ = None

    def __repr__(self):
        return f"BoundaryPoint({self.theta!r})"


@dataclass(frozen=True)
class InteriorPoint:
    x: float
    y: float

    def __post_init__(self):
        if math.hypot(self.x, self.y) >= 1.0 - EPS_GEO:
            raise GeometryError(f"point ({self.x}, {self.y}) is not inside the unit disk")

    @classmethod
    def from_complex(cls, z: complex) -> "InteriorPoint":
        return cls(float(z.real), float(z.imag))

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)


ORIGIN = InteriorPoint(0.0, 0.0)


def _as_complex(p) -> complex:
    if isinstance(p, (BoundaryPoint, InteriorPoint)):
        return p.z
    return complex(p)


# ---------------------------------------------------------------------------
# Moebius maps of the disk


@dataclass(frozen=True)
class MoebiusMap:
    """Disk isometry ``z -> (alpha w + beta) / (conj(beta) w + conj(alpha))``.

    ``w`` is ``z`` for orientation preserving maps and ``conj(z)`` when
    ``reflect`` is set.  The pair is normalized to ``|alpha|^2 - |beta|^2 = 1``.
    """

    alpha: complex
    beta: complex
    reflect: bool = False

    def __post_init__(self):
        a, b = complex(self.alpha), complex(self.beta)
        det = abs(a) ** 2 - abs(b) ** 2
        if det <= 0.0:
            raise GeometryError("not a disk automorphism")
        s = math.sqrt(det)
        object.__setattr__(self, "alpha", a / s)
        object.__setattr__(self, "beta", b / s)

    @classmethod
    def identity(cls) -> "MoebiusMap":
        return cls(1.0, 0.0)

    @classmethod
    def rotation(cls, phi: float) -> "MoebiusMap":
        h = 0.5 * phi
        return cls(complex(math.cos(h), math.sin(h)), 0.0)

    @classmethod
    def to_origin(cls, p) -> "MoebiusMap":
        """Hyperbolic translation taking ``p`` to the origin."""
        c = _as_complex(p)
        return cls(1.0, -c)

    @classmethod
    def conjugation(cls) -> "MoebiusMap":
        return cls(1.0, 0.0, True)

    @classmethod
    def random(cls, rng: np.random.Generator, max_radius: float = 0.9) -> "MoebiusMap":
        r = max_radius * math.sqrt(rng.uniform())
        c = r * complex(math.cos(t := rng.uniform(0, TWO_PI)), math.sin(t))
        m = cls.rotation(rng.uniform(0, TWO_PI)).compose(cls.to_origin(c))
        if rng.uniform() < 0.5:
            m = m.compose(cls.conjugation())
        return m

    @property
    def matrix(self) -> np.ndarray:
        a, b = self.alpha, self.beta
        return np.array([[a, b], [b.conjugate(), a.conjugate()]])

    def __call__(self, z):
        """Apply to complex numbers (scalars or arrays)."""
        w = np.conj(z) if self.reflect else z
        return (self.alpha * w + self.beta) / (self.beta.conjugate() * w + self.alpha.conjugate())

    def apply(self, p):
        """Apply to a BoundaryPoint, InteriorPoint or complex value."""
        if isinstance(p, BoundaryPoint):
            return BoundaryPoint.from_complex(complex(self(p.z)))
        if isinstance(p, InteriorPoint):
            return InteriorPoint.from_complex(complex(self(p.z)))
        return self(p)

    def compose(self, other: "MoebiusMap") -> "MoebiusMap":
        """Return ``self o other`` (apply ``other`` first)."""
        m2 = other.matrix
        if self.reflect:
            m2 = np.conj(m2)
        m = self.matrix @ m2
        return MoebiusMap(m[0, 0], m[0, 1], self.reflect != other.reflect)

    __matmul__ = compose

    def inverse(self) -> "MoebiusMap":
        a, b = self.alpha, self.beta
        if not self.reflect:
            return MoebiusMap(a.conjugate(), -b)
        # z = M conj(w)  =>  w = conj(M^-1 z)
        return MoebiusMap(a, -b.conjugate(), True)

    def boundary_stretch(self, z) -> np.ndarray:
        """``|m'(z)|``, the factor by which horocycle sizes are transported."""
        w = np.conj(z) if self.reflect else z
        return 1.0 / np.abs(self.beta.conjugate() * w + self.alpha.conjugate()) ** 2


def reflection_across(a, b) -> MoebiusMap:
    """Reflection of the disk across the geodesic with ideal endpoints a, b."""
    za, zb = _as_complex(a), _as_complex(b)
    if abs(za - zb) < EPS_GEO:
        raise DegenerateSide("geodesic endpoints coincide")
    # move the geodesic to the real diameter, conjugate, move back
    m = geodesic_to_diameter(za, zb)
    return m.inverse().compose(MoebiusMap.conjugation()).compose(m)


def geodesic_to_diameter(a: complex, b: complex) -> MoebiusMap:
    """Disk automorphism sending ``a -> -1`` and ``b -> +1``."""
    # translate the midpoint of the geodesic (closest point to 0) to 0, then rotate
    mid = geodesic_foot(0j, a, b)
    t = MoebiusMap.to_origin(mid)
    ta = complex(t(a))
    return MoebiusMap.rotation(math.pi - math.atan2(ta.imag, ta.real)).compose(t)


# ---------------------------------------------------------------------------
# Model changes


def cayley(z):
    """Disk -> upper half-plane, ``z -> i(1+z)/(1-z)`` (sends 1 to infinity)."""
    return 1j * (1.0 + z) / (1.0 - z)


def inverse_cayley(w):
    """Upper half-plane -> disk."""
    return (w - 1j) / (w + 1j)


def poincare_to_klein(z):
    return 2.0 * z / (1.0 + np.abs(z) ** 2)


def klein_to_poincare(k):
    return k / (1.0 + np.sqrt(np.maximum(0.0, 1.0 - np.abs(k) ** 2)))


def conformal_factor(z):
    """Disk metric density ``2 / (1 - |z|^2)``."""
    return 2.0 / (1.0 - np.abs(z) ** 2)


# ---------------------------------------------------------------------------
# Distances and invariants


def cross_ratio(d1, d2, d3, d4) -> float:
    z = [_as_complex(d) for d in (d1, d2, d3, d4)]
    for i in range(4):
        for j in range(i + 1, 4):
            if abs(z[i] - z[j]) <= EPS_GEO:
                raise CoincidentPoints("cross ratio of coincident points")
    cr = (z[0] - z[2]) * (z[1] - z[3]) / ((z[1] - z[2]) * (z[0] - z[3]))
    if abs(cr.imag) > 1e-10 * max(1.0, abs(cr)):
        raise GeometryError(f"points are not concircular (cross ratio {cr})")
    return cr.real


def truncated_distance(p, q, sp: float = 1.0, sq: float = 1.0) -> float:
    """Signed length of the geodesic ``[p, q]`` outside the horocycles at p, q."""
    zp, zq = _as_complex(p), _as_complex(q)
    d2 = abs(zp - zq) ** 2
    if d2 <= EPS_GEO ** 2:
        raise CoincidentPoints("truncated distance between coincident ideal points")
    if sp <= 0.0 or sq <= 0.0:
        raise GeometryError("horocycle sizes must be positive")
    return math.log(d2 / (sp * sq))


def truncated_distance_halfplane(xp: float, xq: float, sp: float, sq: float) -> float:
    """Half-plane version with horocycle Euclidean diameters ``sp``, ``sq``."""
    if abs(xp - xq) <= EPS_GEO:
        raise CoincidentPoints("truncated distance between coincident ideal points")
    return math.log((xp - xq) ** 2 / (sp * sq))


def distance_to_horocycle(p, sp: float, r) -> float:
    """Signed distance from interior point ``r`` to the horocycle at ``p``.

    Negative inside the horodisk.  This is the length ``|pr|`` used by the
    triangle inequality at infinity.
    """
    zp, zr = _as_complex(p), _as_complex(r)
    return math.log(2.0 * abs(zp - zr) ** 2 / (sp * (1.0 - abs(zr) ** 2)))


def hyperbolic_distance(p, q) -> float:
    zp, zq = _as_complex(p), _as_complex(q)
    num = 2.0 * abs(zp - zq) ** 2
    den = (1.0 - abs(zp) ** 2) * (1.0 - abs(zq) ** 2)
    return math.acosh(1.0 + num / den)


def hyperbolic_distances(z0: complex, z: np.ndarray) -> np.ndarray:
    num = 2.0 * np.abs(z - z0) ** 2
    den = (1.0 - abs(z0) ** 2) * (1.0 - np.abs(z) ** 2)
    return np.arccosh(1.0 + num / den)


def _geodesic_frame(a: complex, b: complex) -> complex:
    """Rotation ``rot`` such that ``z -> rot (z - a)/(z - b)`` maps the disk
    onto the upper half-plane with ``a -> 0`` and ``b -> oo``."""
    if abs(a - b) <= EPS_GEO:
        raise DegenerateSide("geodesic endpoints coincide")
    # image of the circle is a line through 0; rotate it onto the real axis
    c = -(a + b) / abs(a + b) if abs(a + b) > 1e-6 else 1j * a
    wc = (c - a) / (c - b)
    rot = abs(wc) / wc
    if (rot * a / b).imag < 0:
        rot = -rot
    return rot


def _from_frame(w, a: complex, b: complex, rot: complex):
    g = w / rot
    return (a - g * b) / (1.0 - g)


def distance_to_geodesic(z, a, b):
    """Unsigned hyperbolic distance from disk point(s) ``z`` to geodesic [a, b]."""
    za, zb = _as_complex(a), _as_complex(b)
    rot = _geodesic_frame(za, zb)
    if isinstance(z, (InteriorPoint, BoundaryPoint)):
        z = z.z
    w = rot * (np.asarray(z) - za) / (np.asarray(z) - zb)
    return np.arcsinh(np.abs(np.real(w)) / np.imag(w))


def geodesic_foot(z, a, b) -> complex:
    """Closest point to ``z`` on the geodesic [a, b]."""
    za, zb = _as_complex(a), _as_complex(b)
    rot = _geodesic_frame(za, zb)
    zz = _as_complex(z)
    w = rot * (zz - za) / (zz - zb)
    return complex(_from_frame(1j * abs(w), za, zb, rot))


def geodesic_points(a, b, t) -> np.ndarray:
    """Points of [a, b] at signed arclength ``t`` (towards b) from the foot of the origin."""
    za, zb = _as_complex(a), _as_complex(b)
    rot = _geodesic_frame(za, zb)
    h0 = abs(rot * za / zb)
    w = 1j * h0 * np.exp(np.asarray(t, dtype=float))
    return _from_frame(w, za, zb, rot)


def horocycle_geodesic_point(p, sp: float, q) -> complex:
    """Intersection of the horocycle of size ``sp`` at ``p`` with the geodesic [p, q]."""
    zp, zq = _as_complex(p), _as_complex(q)
    foot = complex(geodesic_points(zp, zq, 0.0))
    # the signed distance to the horocycle grows at unit rate moving towards q
    t = -distance_to_horocycle(zp, sp, foot)
    return complex(geodesic_points(zp, zq, t))


def geodesic_circle(a, b):
    """Euclidean circle carrying [a, b]: ``(center, radius)`` or ``None`` for a diameter."""
    za, zb = _as_complex(a), _as_complex(b)
    s = za + zb
    if abs(s) < 1e-14:
        return None
    half = 0.5 * abs(angle_gap(math.atan2(za.imag, za.real), math.atan2(zb.imag, zb.real)))
    u = s / abs(s)
    return u / math.cos(half), math.tan(half)


def horocycle_circle(p, sigma: float):
    """Euclidean ``(center, radius)`` of the horocycle of size ``sigma`` at ``p``."""
    zp = _as_complex(p)
    d = 2.0 * sigma / (2.0 + sigma)
    return zp * (1.0 - 0.5 * d), 0.5 * d


def disjoint_horocycles(points: Sequence, sizes: Sequence[float]) -> bool:
    """True when no two of the decorated horocycles meet."""
    n = len(points)
    for i in range(n):
        for j in range(i + 1, n):
            if truncated_distance(points[i], points[j], sizes[i], sizes[j]) <= 0.0:
                return False
    return True


@dataclass(frozen=True)
class Decoration:
    """Horocycle sizes ``sigma_i > 0`` indexed by polygon vertex."""

    sizes: tuple

    def __post_init__(self):
        s = tuple(float(v) for v in self.sizes)
        if any(not (v > 0.0 and math.isfinite(v)) for v in s):
            raise GeometryError("horocycle sizes must be finite and positive")
        object.__setattr__(self, "sizes", s)

    @classmethod
    def unit(cls, n: int) -> "Decoration":
        return cls((1.0,) * n)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, low=1e-3, high=1.0) -> "Decoration":
        return cls(tuple(np.exp(rng.uniform(math.log(low), math.log(high), n))))

    def __len__(self):
        return len(self.sizes)

    def __getitem__(self, i):
        return self.sizes[i]

    def scaled(self, factor: float) -> "Decoration":
        return Decoration(tuple(factor * s for s in self.sizes))

    def is_disjoint(self, vertices: Sequence) -> bool:
        return disjoint_horocycles(vertices, self.sizes)

    def push_forward(self, m: MoebiusMap, vertices: Sequence) -> "Decoration":
        """Sizes of the image horocycles under ``m``."""
        return Decoration(tuple(s * float(m.boundary_stretch(_as_complex(v)))
                                for s, v in zip(self.sizes, vertices)))

    def disjoint_for(self, vertices: Sequence, factor: float = 0.5,
                     max_halvings: int = 200) -> "Decoration":
        """Shrink uniformly until the horocycles are pairwise disjoint."""
        dec = self
        for _ in range(max_halvings):
            if dec.is_disjoint(vertices):
                return dec
            dec = dec.scaled(factor)
        raise GeometryError("could not separate horocycles")


def shrinking_schedule(sizes: Sequence[float], factor: float = 0.5) -> Iterator[tuple]:
    """Infinite schedule ``s, s/2, s/4, ...`` of decorations."""
    cur = tuple(float(s) for s in sizes)
    while True:
        yield cur
        cur = tuple(factor * s for s in cur)


# ---------------------------------------------------------------------------
# Regular quadrilaterals


def _far_arc(za: complex, zb: complex, o: complex):
    """Angles describing the side [a, b] seen from ``o`` moved to the origin."""
    t = MoebiusMap.to_origin(o)
    ta, tb = complex(t(za)), complex(t(zb))
    th_a = math.atan2(ta.imag, ta.real)
    th_b = math.atan2(tb.imag, tb.real)
    return t, th_a, th_b


def make_regular_quadrilateral(a0, a1, O=ORIGIN, side_of: str = "far"):
    """Ideal points ``(b1, b2)`` making ``P(b1, b2, a1, a0)`` a regular quadrilateral.

    The quadrilateral sits on the side of the geodesic [a0, a1] away from
    ``O`` (``side_of="far"``, the default) or towards it (``"near"``), and is
    symmetric under the reflection across the geodesic through ``O``
    orthogonal to [a0, a1].  ``b1`` is adjacent to ``a0``.

    The vertices a0, b1, b2, a1 follow each other clockwise around the
    boundary arc cut off by [a0, a1] on the chosen side.
    """
    za, zb = _as_complex(a0), _as_complex(a1)
    if abs(za - zb) <= EPS_GEO:
        raise DegenerateSide("regular quadrilateral on a degenerate side")
    t, th0, th1 = _far_arc(za, zb, _as_complex(O))
    if side_of == "far":
        # clockwise arc from a0 to a1 in the frame where O is the origin
        gap = (th0 - th1) % TWO_PI
        sign = -1.0
    elif side_of == "near":
        gap = (th1 - th0) % TWO_PI
        sign = 1.0
    else:
        raise ValueError(f"side_of must be 'far' or 'near', got {side_of!r}")
    half = 0.5 * gap
    mid = th0 + sign * half
    beta = 2.0 * math.atan(REGULAR_RATIO * math.tan(0.5 * half))
    # b1 lies beyond a0's end, b2 beyond a1's end
    w1 = complex(math.cos(mid - sign * beta), math.sin(mid - sign * beta))
    w2 = complex(math.cos(mid + sign * beta), math.sin(mid + sign * beta))
    back = t.inverse()
    return BoundaryPoint.from_complex(complex(back(w1))), BoundaryPoint.from_complex(complex(back(w2)))


def orthogonal_reflection(a0, a1, O=ORIGIN) -> MoebiusMap:
    """Reflection across the geodesic through ``O`` orthogonal to [a0, a1]."""
    za, zb, zo = _as_complex(a0), _as_complex(a1), _as_complex(O)
    t = MoebiusMap.to_origin(zo)
    ta, tb = complex(t(za)), complex(t(zb))
    # in this frame the axis is the diameter along the bisector of ta, tb
    u = ta + tb
    if abs(u) < 1e-15:
        u = 1j * ta
    phi = math.atan2(u.imag, u.real)
    rot = MoebiusMap.rotation(-phi)
    axis = rot.inverse().compose(MoebiusMap.conjugation()).compose(rot)
    return t.inverse().compose(axis).compose(t)
