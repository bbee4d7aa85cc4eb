import json
import math

import numpy as np
import pytest

from scherk.analysis import (AnalysisError, NotAnAnnulus, RingSpec, angle_defects, annulus_mesh,
                             annulus_ring, boundary_turning, condenser_rings, curvature_csv,
                             curvature_series, distance_rings, euclidean_metric,
                             euler_characteristic, induced_metric, metric_from_heights,
                             ring_modulus, ring_report, total_curvature)
from scherk.hypgeo import hyperbolic_distances
from scherk.meshing import triangulate, truncate
from scherk.solver import BoundaryData, scherk_sequence, solve


@pytest.fixture(scope="module")
def mesh(square):
    return triangulate(truncate(square, 1), 0.2)


@pytest.fixture(scope="module")
def scherk8(square):
    return scherk_sequence(square, [8])[0]


def _far(sol):
    return float(hyperbolic_distances(0j, sol.mesh.z).max())


# ---------------------------------------------------------------------------
# induced metric


def test_flat_graph_has_base_lengths(mesh):
    gm = induced_metric(solve(mesh, BoundaryData.constant(mesh, 0.0)))
    assert np.array_equal(gm.lengths, gm.base_lengths)
    assert gm.area() == pytest.approx(gm.base_areas.sum(), rel=1e-14)


def test_vertical_translation_is_an_isometry(mesh):
    a = metric_from_heights(mesh, np.zeros(mesh.n_nodes))
    b = metric_from_heights(mesh, np.full(mesh.n_nodes, 7.25))
    assert np.array_equal(a.lengths, b.lengths)


def test_graph_area_exceeds_base_area(mesh, rng):
    u = rng.normal(size=mesh.n_nodes)
    gm = metric_from_heights(mesh, u)
    assert np.all(gm.areas >= gm.base_areas - 1e-15)
    assert gm.area() > gm.base_areas.sum()
    assert np.all(gm.lengths >= gm.base_lengths)


def test_lengths_follow_the_product_metric(mesh, rng):
    u = rng.normal(size=mesh.n_nodes)
    gm = metric_from_heights(mesh, u)
    tri = mesh.triangles
    # edge a is opposite corner a
    du = u[tri[:, 2]] - u[tri[:, 1]]
    assert np.allclose(gm.lengths[:, 0] ** 2, gm.base_lengths[:, 0] ** 2 + du ** 2, rtol=1e-12)


# ---------------------------------------------------------------------------
# moduli


@pytest.mark.parametrize("n_inner", [48, 96])
def test_round_annulus_modulus(n_inner):
    m = annulus_mesh(1.0, math.e, n_inner)
    assert ring_modulus(euclidean_metric(m), annulus_ring(m)) == pytest.approx(1.0, rel=0.02)


def test_annulus_modulus_tracks_log_ratio():
    for R in (2.0, 4.0):
        m = annulus_mesh(1.0, R, 64)
        assert ring_modulus(euclidean_metric(m), annulus_ring(m)) == pytest.approx(math.log(R),
                                                                                   rel=0.02)


def test_modulus_is_scale_invariant(scherk8):
    gm = induced_metric(scherk8)
    ring = distance_rings(scherk8.mesh, 0j, [0.5, 2.0])[0]
    ref = ring_modulus(gm, ring)
    for c in (0.01, 3.0, 250.0):
        assert ring_modulus(gm.scaled(c), ring) == pytest.approx(ref, rel=1e-10)


def test_annulus_loops_are_found():
    m = annulus_mesh(1.0, 2.0, 32)
    ring = annulus_ring(m)
    assert np.all(m.markers[ring.inner] == 2) and np.all(m.markers[ring.outer] == 1)


def test_not_an_annulus(mesh):
    with pytest.raises(NotAnAnnulus):
        RingSpec.from_triangles(mesh, np.arange(mesh.n_triangles))  # a disk
    with pytest.raises(NotAnAnnulus):
        condenser_rings(mesh, np.zeros(mesh.n_nodes), [1.0, 2.0])
    with pytest.raises(AnalysisError):
        condenser_rings(mesh, np.zeros(mesh.n_nodes), [2.0, 1.0])


def test_scherk_rings_are_bounded_below(scherk8):
    """Four concentric rings; the typical height |u| grows from ring to ring."""
    far = _far(scherk8)
    radii = np.linspace(0.5, 0.9 * far, 5)
    rep = ring_report(scherk8, 0j, radii)
    assert len(rep.moduli) == 4
    assert min(rep.moduli) > 0.05
    d = hyperbolic_distances(0j, scherk8.mesh.z)
    tops = [np.median(np.abs(scherk8.u[(d >= lo) & (d <= hi)])) for lo, hi in zip(radii, radii[1:])]
    assert all(b > a for a, b in zip(tops, tops[1:]))
    json.dumps(rep.to_dict(), allow_nan=False)


def test_nested_rings_are_superadditive(scherk8):
    gm = induced_metric(scherk8)
    far = _far(scherk8)
    r0, r1, r2 = 0.5, 0.5 + 0.3 * (0.9 * far - 0.5), 0.9 * far
    inner, outer = distance_rings(scherk8.mesh, 0j, [r0, r1, r2])
    whole = distance_rings(scherk8.mesh, 0j, [r0, r2])[0]
    total = ring_modulus(gm, whole)
    parts = ring_modulus(gm, inner) + ring_modulus(gm, outer)
    assert total >= 0.98 * parts


# ---------------------------------------------------------------------------
# curvature


def test_flat_section_has_curvature_minus_area(square):
    m = triangulate(truncate(square, 1), 0.025)
    gm = induced_metric(solve(m, BoundaryData.constant(m, 0.0)))
    assert total_curvature(gm) == pytest.approx(-m.hyperbolic_areas().sum(), rel=0.02)


def test_discrete_gauss_bonnet(scherk8):
    gm = induced_metric(scherk8)
    chi = euler_characteristic(scherk8.mesh)
    assert chi == 1
    assert total_curvature(gm) + boundary_turning(gm) == pytest.approx(2 * math.pi, abs=1e-9)


def test_curvature_ignores_translation(scherk8):
    """A shift perturbs height differences only by rounding; dyadic heights shift exactly."""
    a = total_curvature(induced_metric(scherk8))
    b = total_curvature(induced_metric(scherk8.shifted(4.0)))
    assert b == pytest.approx(a, rel=1e-12)
    u = np.round(scherk8.u * 1024) / 1024  # dyadic heights shift exactly
    a = total_curvature(metric_from_heights(scherk8.mesh, u))
    b = total_curvature(metric_from_heights(scherk8.mesh, u - 4.0))
    assert a == b


def test_scherk_total_curvature_tends_to_minus_two_pi(square_seq):
    rows = curvature_series(square_seq)
    errs = [abs(r.total_curvature + 2 * math.pi) for r in rows]
    assert all(r.total_curvature < 0 for r in rows)
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] <= 0.15 * 2 * math.pi
    text = curvature_csv(rows, {"seed": 0})
    assert text.splitlines()[0].startswith("# config ")
    assert len(text.splitlines()) == 2 + len(rows)


def test_interior_defects_of_flat_section_are_negative(mesh):
    d = angle_defects(induced_metric(solve(mesh, BoundaryData.constant(mesh, 0.0))))
    assert np.all(d[mesh.interior] < 0)
