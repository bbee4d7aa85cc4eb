"""Domain extension by perturbed regular quadrilaterals and the exhaustion driver.

Each step processes the sides of the current polygon in disjoint adjacent
pairs ``([d_{2j}, d_{2j+1}], [d_{2j+1}, d_{2j+2}])``.  A regular
quadrilateral is attached on the far side of each of the two sides, and the
two new vertices next to the shared vertex ``d_{2j+1}`` are moved towards it
by the boundary angle ``tau``.  A 2k-gon becomes a 6k-gon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .hypgeo import (ORIGIN, TWO_PI, BoundaryPoint, GeometryError, InteriorPoint,
                     MoebiusMap, _as_complex, _far_arc, distance_to_geodesic,
                     make_regular_quadrilateral)
from .polygon import AdmissibilityReport, ScherkPolygon, check_admissibility, phi

TAU_MIN = 1e-6
LN_1_PLUS_SQRT2 = math.log(1.0 + math.sqrt(2.0))


class ExtensionError(GeometryError):
    pass


class Overshoot(ExtensionError):
    pass


class NotAdmissibleParent(ExtensionError):
    pass


class NoAdmissibleTau(ExtensionError):
    pass


def _ccw_gap(frm: float, to: float) -> float:
    return (to - frm) % TWO_PI


def perturb_quadrilateral(a0, a1, b1, b2, tau: float):
    """Move ``b2`` towards ``a1`` by the boundary angle ``tau``; ``b1`` stays.

    Returns ``(b1, b2')``.  Raises ``Overshoot`` when ``tau`` reaches the
    angular gap between ``b2`` and ``a1``.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    b2 = b2 if isinstance(b2, BoundaryPoint) else BoundaryPoint.from_complex(_as_complex(b2))
    if tau == 0:
        return b1, b2
    a1t = a1.theta if isinstance(a1, BoundaryPoint) else BoundaryPoint.from_complex(_as_complex(a1)).theta
    # a1 sits on the side of b2 away from b1: find the short way round
    ccw = _ccw_gap(b2.theta, a1t)
    cw = _ccw_gap(a1t, b2.theta)
    b1t = b1.theta if isinstance(b1, BoundaryPoint) else BoundaryPoint.from_complex(_as_complex(b1)).theta
    # the arc from b2 to a1 must not contain b1
    if _ccw_gap(b2.theta, b1t) > ccw:
        direction, gap = 1.0, ccw
    else:
        direction, gap = -1.0, cw
    if tau >= gap:
        raise Overshoot(f"tau={tau:g} passes the neighbouring vertex (gap {gap:g})")
    return b1, BoundaryPoint(b2.theta + direction * tau)


def boundary_distance(D: ScherkPolygon, O=ORIGIN) -> float:
    """Hyperbolic distance from ``O`` to the boundary of the ideal polygon."""
    z = _as_complex(O)
    n = D.n
    return float(min(distance_to_geodesic(z, D.vertices[i], D.vertices[(i + 1) % n])
                     for i in range(n)))


def side_step(a0, a1, new_vertices, O=ORIGIN) -> float:
    """Outward step gained over the side ``[a0, a1]`` by the attached vertices.

    Work in the upper half-plane frame where ``a0 = -1``, ``a1 = 1`` and the
    geodesic through ``O`` orthogonal to the side is the imaginary axis, with
    ``O`` inside the unit semicircle.  Each new side ``[x, y]`` is a
    semicircle of top height ``|x - y| / 2``; the step is the log of the
    lowest top, i.e. the separation between the horocycles centred at
    infinity through the old and new side tops.  A regular quadrilateral
    gives exactly ``ln(1 + sqrt 2)``.
    """
    za, zb = _as_complex(a0), _as_complex(a1)
    t, th0, th1 = _far_arc(za, zb, _as_complex(O))
    gap = (th0 - th1) % TWO_PI
    far = th0 - 0.5 * gap
    c_far = complex(math.cos(far), math.sin(far))
    c_near = -c_far
    ta, tb = complex(t(za)), complex(t(zb))

    def x(z):
        return ((z - c_near) * (tb - c_far) / ((z - c_far) * (tb - c_near))).real

    chain = [ta] + [complex(t(_as_complex(v))) for v in new_vertices] + [tb]
    xs = [x(z) for z in chain]
    tops = [abs(p - q) / 2.0 for p, q in zip(xs, xs[1:])]
    return math.log(min(tops) / (abs(xs[-1] - xs[0]) / 2.0))


@dataclass
class ExtensionStep:
    parent: ScherkPolygon
    child: ScherkPolygon
    tau: float
    phi_values: list
    step_distance: float
    side_steps: list
    report: AdmissibilityReport
    base_point: InteriorPoint = ORIGIN
    tau_tries: list = field(default_factory=list)

    @property
    def admissible(self) -> bool:
        return self.report.admissible

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "tau_tries": self.tau_tries,
            "parent_vertices": self.parent.n,
            "child_vertices": self.child.n,
            "phi_values": self.phi_values,
            "step_distance": self.step_distance,
            "min_side_step": min(self.side_steps),
            "admissibility": self.report.to_dict(),
        }


def _pair(a0, a1, a2, O, tau):
    """New vertices for the adjacent sides [a0, a1] and [a1, a2]."""
    b1, b2 = make_regular_quadrilateral(a0, a1, O)
    b3, b4 = make_regular_quadrilateral(a1, a2, O)
    b1, b2 = perturb_quadrilateral(a0, a1, b1, b2, tau)
    b4, b3 = perturb_quadrilateral(a2, a1, b4, b3, tau)
    phis = [phi(a0, b1, b2, a1), phi(a2, b4, b3, a1)]
    steps = [side_step(a0, a1, [b1, b2], O), side_step(a1, a2, [b3, b4], O)]
    return (b1, b2, b3, b4), phis, steps


def attach(D: ScherkPolygon, O=ORIGIN, tau: float = 0.0):
    """Child polygon and per-quadrilateral phi values, no admissibility check.

    Returns ``(child, phi_values, side_steps)``.
    """
    V = D.vertices
    n = D.n
    out = []
    phis = []
    steps = []
    for j in range(0, n, 2):
        a0, a1, a2 = V[j], V[j + 1], V[(j + 2) % n]
        (b1, b2, b3, b4), ph, st = _pair(a0, a1, a2, O, tau)
        phis += ph
        steps += st
        out += [a0, b1, b2, a1, b3, b4]
    return ScherkPolygon(tuple(out), D.first_edge), phis, steps


def attach_pair(D: ScherkPolygon, j: int = 0, O=ORIGIN, tau: float = 0.0):
    """Attach quadrilaterals to the two sides meeting at ``d_{j+1}`` only.

    ``j`` must be even so that the labels of the remaining sides are kept.
    The child has ``2k + 4`` vertices; the quadrilateral on ``[d_j, d_{j+1}]``
    occupies child indices ``j .. j+3`` and the one on ``[d_{j+1}, d_{j+2}]``
    occupies ``j+3 .. j+6`` (modulo the vertex count).

    Returns ``(child, phi_values, side_steps)``.
    """
    if j % 2:
        raise ExtensionError("the pair must start at an even vertex index")
    V = list(D.vertices)
    n = D.n
    a0, a1, a2 = V[j], V[j + 1], V[(j + 2) % n]
    (b1, b2, b3, b4), phis, steps = _pair(a0, a1, a2, O, tau)
    out = V[:j + 1] + [b1, b2, a1, b3, b4] + V[j + 2:]
    return ScherkPolygon(tuple(out), D.first_edge), phis, steps


def extend_once(D: ScherkPolygon, O=ORIGIN, tau: float = 1e-3, *,
                require_admissible: bool = True, check_parent: bool = True) -> ExtensionStep:
    """Attach perturbed regular quadrilaterals to every side of ``D``.

    When the child fails the admissibility check (or a perturbation
    overshoots), ``tau`` is halved down to ``TAU_MIN``.  With
    ``require_admissible=False`` the first child is returned whatever its
    verdict, which is how the unperturbed (``tau = 0``) extension is
    inspected.
    """
    if check_parent:
        parent_report = check_admissibility(D, "auto")
        if not parent_report.admissible:
            raise NotAdmissibleParent(f"parent polygon is not admissible ({parent_report.status})")
    d0 = boundary_distance(D, O)
    tries = []
    t = float(tau)
    while True:
        tries.append(t)
        try:
            child, phis, steps = attach(D, O, t)
        except Overshoot:
            child = None
        if child is not None:
            report = check_admissibility(child, "auto")
            if report.admissible or not require_admissible:
                return ExtensionStep(D, child, t, phis, boundary_distance(child, O) - d0,
                                     steps, report, O, tries)
        t *= 0.5
        if t < TAU_MIN:
            raise NoAdmissibleTau(f"no admissible child for tau in [{TAU_MIN:g}, {tau:g}]")


@dataclass
class ExhaustionTrace:
    domains: list
    base_point: InteriorPoint
    distances: list
    tau_schedule: list
    steps: list

    def to_dict(self) -> dict:
        return {
            "base_point": [self.base_point.x, self.base_point.y],
            "domains": [D.to_spec() for D in self.domains],
            "vertex_counts": [D.n for D in self.domains],
            "tau_schedule": self.tau_schedule,
            "distances": self.distances,
            "steps": [s.to_dict() for s in self.steps],
        }

    def dump(self, path, extra: dict | None = None) -> None:
        data = self.to_dict()
        if extra:
            data = {**extra, **data}
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def exhaust(D0: ScherkPolygon, O=ORIGIN, n_steps: int = 3, tau0: float = 1e-3) -> ExhaustionTrace:
    """Iterate ``extend_once`` with ``tau_n = tau0 2^{-n}``."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if not isinstance(O, InteriorPoint):
        O = InteriorPoint.from_complex(_as_complex(O))
    domains = [D0]
    distances = [boundary_distance(D0, O)]
    taus = []
    steps = []
    D = D0
    for i in range(n_steps):
        step = extend_once(D, O, tau0 * 2.0 ** (-i), check_parent=(i == 0))
        steps.append(step)
        taus.append(step.tau)
        D = step.child
        domains.append(D)
        distances.append(boundary_distance(D, O))
    return ExhaustionTrace(domains, O, distances, taus, steps)


def new_vertices_outside(step: ExtensionStep) -> bool:
    """Every new vertex lies beyond its parent side (nesting of hulls)."""
    P = step.parent
    O = _as_complex(step.base_point)
    n = P.n
    child = step.child.vertices
    for i in range(n):
        a0, a1 = P.vertices[i], P.vertices[(i + 1) % n]
        new = child[3 * i + 1: 3 * i + 3]
        t, th0, th1 = _far_arc(a0.z, a1.z, O)
        far = (th0 - th1) % TWO_PI
        for v in new:
            g = (th0 - math.atan2(complex(t(v.z)).imag, complex(t(v.z)).real)) % TWO_PI
            if not 0.0 < g < far:
                return False
    return True


__all__ = ["perturb_quadrilateral", "attach", "extend_once", "exhaust", "side_step",
           "boundary_distance", "ExtensionStep", "ExhaustionTrace", "Overshoot",
           "attach_pair", "NotAdmissibleParent", "NoAdmissibleTau", "TAU_MIN", "LN_1_PLUS_SQRT2",
           "new_vertices_outside"]
