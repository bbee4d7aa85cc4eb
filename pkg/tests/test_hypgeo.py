import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from scherk.hypgeo import (ORIGIN, BoundaryPoint, CoincidentPoints, Decoration, GeometryError,
                           InteriorPoint, MoebiusMap, cayley, cross_ratio, distance_to_geodesic,
                           geodesic_points, hyperbolic_distance, inverse_cayley,
                           make_regular_quadrilateral, orthogonal_reflection, reflection_across,
                           truncated_distance, truncated_distance_halfplane)

angles = st.floats(0.0, 2 * math.pi, exclude_max=True)
inside = st.builds(lambda r, t: r * cmath.exp(1j * t), st.floats(0.0, 0.95), angles)


def _ideal(theta):
    return cmath.exp(1j * theta)


# ---------------------------------------------------------------------------
# independent oracles


def _arclength_between_horocycles(p, q, sp, sq):
    """Hyperbolic length of the geodesic [p, q] between its horocycle crossings.

    The geodesic is the circle orthogonal to the unit circle through p and q;
    the horocycle of size s at p is the Euclidean circle of diameter
    2s/(2+s) tangent at p.  Both crossings are found by root finding in the
    circle angle and the conformal factor is integrated numerically.
    """
    half = 0.5 * abs(cmath.phase(q / p))
    u = (p + q) / abs(p + q)
    c, r = u / math.cos(half), math.tan(half)
    phi_p, phi_q = cmath.phase(p - c), cmath.phase(q - c)
    if (phi_q - phi_p) % (2 * math.pi) > math.pi:
        phi_p, phi_q, p, q, sp, sq = phi_q, phi_p, q, p, sq, sp
    span = (phi_q - phi_p) % (2 * math.pi)

    def point(t):
        return c + r * cmath.exp(1j * (phi_p + t))

    def crossing(z0, s, t_lo, t_hi):
        d = 2 * s / (2 + s)
        centre = z0 * (1 - d / 2)
        return brentq(lambda t: abs(point(t) - centre) - d / 2, t_lo, t_hi, xtol=1e-15)

    t1 = crossing(p, sp, 1e-12, span / 2)
    t2 = crossing(q, sq, span / 2, span - 1e-12)
    val, _ = quad(lambda t: 2 * r / (1 - abs(point(t)) ** 2), t1, t2, epsabs=1e-13, epsrel=1e-13,
                  limit=200)
    return val


# ---------------------------------------------------------------------------
# truncated distance


def test_tangent_horocycles_have_zero_truncated_distance():
    assert truncated_distance_halfplane(0.0, 1.0, 1.0, 1.0) == 0.0


def test_truncated_distance_matches_arclength(rng):
    for _ in range(25):
        a, b = rng.uniform(0, 2 * math.pi, 2)
        if abs(cmath.phase(_ideal(a) / _ideal(b))) < 0.3:
            continue
        sp, sq = rng.uniform(0.01, 0.3, 2)
        p, q = _ideal(a), _ideal(b)
        assert truncated_distance(p, q, sp, sq) == pytest.approx(
            _arclength_between_horocycles(p, q, sp, sq), abs=1e-8)


@given(angles, angles, st.floats(1e-3, 5.0), st.floats(1e-3, 5.0))
def test_halving_a_size_adds_ln2(a, b, sp, sq):
    p, q = _ideal(a), _ideal(b)
    if abs(p - q) < 1e-6:
        return
    d = truncated_distance(p, q, sp, sq)
    assert truncated_distance(p, q, sp / 2, sq) - d == pytest.approx(math.log(2), abs=1e-12)


def test_truncated_distance_guards():
    with pytest.raises(CoincidentPoints):
        truncated_distance(1.0, 1.0)
    with pytest.raises(GeometryError):
        truncated_distance(1.0, -1.0, 0.0, 1.0)


# ---------------------------------------------------------------------------
# hyperbolic distance


def test_distance_to_self_is_zero():
    assert hyperbolic_distance(0.3 + 0.2j, 0.3 + 0.2j) == 0.0


@pytest.mark.parametrize("r", [0.1, 0.5, 0.9, 0.99])
def test_radial_distance_integrates_conformal_factor(r):
    val, _ = quad(lambda t: 2 / (1 - t * t), 0, r, epsabs=0, epsrel=1e-12, limit=200)
    assert hyperbolic_distance(ORIGIN, r) == pytest.approx(val, rel=1e-12)
    assert val == pytest.approx(math.log((1 + r) / (1 - r)), rel=1e-12)


def test_triangle_inequality(rng):
    for _ in range(1000):
        z = rng.uniform(0, 0.97, 3) * np.exp(1j * rng.uniform(0, 2 * math.pi, 3))
        d01, d12, d02 = (hyperbolic_distance(z[0], z[1]), hyperbolic_distance(z[1], z[2]),
                         hyperbolic_distance(z[0], z[2]))
        assert d02 <= d01 + d12 + 1e-12


# ---------------------------------------------------------------------------
# Moebius maps


def test_compose_with_inverse_is_identity(rng):
    z = 0.9 * np.sqrt(rng.uniform(size=100)) * np.exp(1j * rng.uniform(0, 2 * math.pi, 100))
    for _ in range(20):
        m = MoebiusMap.random(rng)
        assert np.max(np.abs(m.compose(m.inverse())(z) - z)) < 1e-12
        assert np.max(np.abs(m.inverse().compose(m)(z) - z)) < 1e-12


def test_reflection_is_an_involution(rng):
    a, b = _ideal(0.3), _ideal(2.5)
    m = reflection_across(a, b)
    z = 0.8 * np.exp(1j * rng.uniform(0, 2 * math.pi, 50))
    assert np.max(np.abs(m(m(z)) - z)) < 1e-12
    # points of the geodesic are fixed
    g = geodesic_points(a, b, np.linspace(-2, 2, 5))
    assert np.max(np.abs(m(g) - g)) < 1e-12


def test_distance_is_invariant_under_random_maps(rng):
    for _ in range(100):
        m = MoebiusMap.random(rng)
        p, q = 0.9 * rng.uniform(size=2) * np.exp(1j * rng.uniform(0, 2 * math.pi, 2))
        assert hyperbolic_distance(m(p), m(q)) == pytest.approx(hyperbolic_distance(p, q),
                                                                abs=1e-10)


@given(inside)
def test_cayley_round_trip(z):
    assert abs(inverse_cayley(cayley(z)) - z) < 1e-10


def test_boundary_stretch_transports_truncated_lengths(rng):
    for _ in range(20):
        m = MoebiusMap.random(rng)
        p, q = _ideal(rng.uniform(0, 6)), _ideal(rng.uniform(0, 6))
        if abs(p - q) < 0.1:
            continue
        sp, sq = rng.uniform(0.05, 1.0, 2)
        dec = Decoration((sp, sq)).push_forward(m, [p, q])
        assert truncated_distance(m(p), m(q), dec[0], dec[1]) == pytest.approx(
            truncated_distance(p, q, sp, sq), abs=1e-10)


def test_point_types_validate():
    with pytest.raises(GeometryError):
        InteriorPoint(1.0, 0.0)
    assert BoundaryPoint(2 * math.pi + 0.5) == BoundaryPoint(0.5)


# ---------------------------------------------------------------------------
# cross ratio and regular quadrilaterals


def test_regular_quadrilateral_has_cross_ratio_two(rng):
    for _ in range(20):
        a0, a1 = BoundaryPoint(rng.uniform(0, 2)), BoundaryPoint(rng.uniform(3, 5))
        b1, b2 = make_regular_quadrilateral(a0, a1)
        assert cross_ratio(a0, b1, b2, a1) == pytest.approx(2.0, abs=1e-10)


def test_cross_ratio_is_moebius_invariant(rng):
    pts = [_ideal(t) for t in (0.1, 1.3, 2.9, 4.4)]
    ref = cross_ratio(*pts)
    for _ in range(100):
        m = MoebiusMap.random(rng)
        assert cross_ratio(*[m(p) for p in pts]) == pytest.approx(ref, abs=1e-12 * max(1, abs(ref)))


def test_cross_ratio_limit_of_coincident_pair():
    d1, d3, d4 = _ideal(0.0), _ideal(2.0), _ideal(4.0)
    vals = [cross_ratio(d1, _ideal(eps), d3, d4) for eps in (1e-2, 1e-4, 1e-6)]
    assert abs(vals[-1] - 1.0) < abs(vals[0] - 1.0)
    assert vals[-1] == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(CoincidentPoints):
        cross_ratio(d1, d1, d3, d4)


def test_regular_quadrilateral_in_normal_position_from_scratch():
    """a0 = -1, a1 = +1 on the half-plane boundary, axis x = 0.

    Recomputed by hand: the new vertices sit at -t and t with
    (1 + t)^2 / (4t) = 2, i.e. t = 3 + 2 sqrt 2.
    """
    a0 = BoundaryPoint.from_complex(inverse_cayley(-1.0 + 0j))
    a1 = BoundaryPoint.from_complex(inverse_cayley(1.0 + 0j))
    b1, b2 = make_regular_quadrilateral(a0, a1)
    x1, x2 = cayley(b1.z).real, cayley(b2.z).real
    assert x1 == pytest.approx(-x2, abs=1e-9)
    t = abs(x1)
    assert (1 + t) ** 2 / (4 * t) == pytest.approx(2.0, abs=1e-12)
    assert t == pytest.approx(3 + 2 * math.sqrt(2), abs=1e-9)


def test_regular_quadrilateral_admits_equal_side_decoration(rng):
    """A decoration with four equal truncated side lengths exists (phi = 0)."""
    for _ in range(10):
        a0, a1 = BoundaryPoint(rng.uniform(0, 2)), BoundaryPoint(rng.uniform(3, 5))
        b1, b2 = make_regular_quadrilateral(a0, a1)
        z = [v.z for v in (a0, b1, b2, a1)]
        # unknowns: common length ell, then ln s_1, ln s_2, ln s_3 (ln s_0 = 0)
        M = np.zeros((4, 4))
        rhs = np.zeros(4)
        for e in range(4):
            i, j = e, (e + 1) % 4
            M[e, 0] = 1.0
            for v in (i, j):
                if v:
                    M[e, v] += 1.0
            rhs[e] = math.log(abs(z[i] - z[j]) ** 2)
        sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        assert np.max(np.abs(M @ sol - rhs)) < 1e-10
        sizes = np.exp(np.concatenate([[0.0], sol[1:]]))
        lengths = [truncated_distance(z[e], z[(e + 1) % 4], sizes[e], sizes[(e + 1) % 4])
                   for e in range(4)]
        assert np.ptp(lengths) < 1e-10


def test_orthogonal_reflection_swaps_the_new_vertices(rng):
    a0, a1 = BoundaryPoint(0.4), BoundaryPoint(3.3)
    O = InteriorPoint(0.1, -0.2)
    b1, b2 = make_regular_quadrilateral(a0, a1, O)
    m = orthogonal_reflection(a0, a1, O)
    assert abs(m(b1.z) - b2.z) < 1e-10
    assert abs(m(a0.z) - a1.z) < 1e-10
    assert abs(m(O.z) - O.z) < 1e-12


def test_regular_quadrilateral_sits_beyond_the_side():
    a0, a1 = BoundaryPoint(0.0), BoundaryPoint(-math.pi / 2)
    b1, b2 = make_regular_quadrilateral(a0, a1)
    mid = geodesic_points(a0, a1, 0.0)
    # the new vertices lie on the far side of [a0, a1] from the origin
    for b in (b1, b2):
        assert abs(b.z - mid) < abs(0 - mid) + 1.0
        assert distance_to_geodesic(0.999 * b.z, a0, a1) > 1.0
