"""Shared fixtures.

Expensive objects (solved sequences) are built once per session.  The
hypothesis profile is derandomized so that every run sees the same
examples.
"""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from scherk.hypgeo import ORIGIN
from scherk.polygon import ScherkPolygon
from scherk.solver import scherk_sequence

settings.register_profile("repo", derandomize=True, deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

N_LIST = [2, 4, 8, 16]


@pytest.fixture(scope="session")
def square():
    return ScherkPolygon.regular(4)


@pytest.fixture(scope="session")
def unbalanced():
    """The square with vertex 1 moved by +0.5 rad: a(Gamma) != b(Gamma)."""
    ang = ScherkPolygon.regular(4).angles
    ang[1] += 0.5
    return ScherkPolygon.from_angles(ang)


@pytest.fixture(scope="session")
def square_seq(square):
    """Default-mesh solutions at n = 2, 4, 8, 16, each on its own level."""
    return scherk_sequence(square, N_LIST, ORIGIN)


@pytest.fixture(scope="session")
def unbalanced_seq(unbalanced):
    """Shared-mesh solutions at n = 8, 16 for the divergence probe."""
    return scherk_sequence(unbalanced, [8, 16], ORIGIN, level=5, check=False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_polygon(rng, n, min_gap=0.05):
    """Clockwise random ideal n-gon with angular gaps at least ``min_gap``."""
    while True:
        gaps = rng.uniform(0.2, 1.0, n)
        gaps *= 2 * math.pi / gaps.sum()
        if gaps.min() >= min_gap:
            break
    start = rng.uniform(0, 2 * math.pi)
    return ScherkPolygon.from_angles(list(start - np.concatenate([[0.0], np.cumsum(gaps[:-1])])))


def smooth_boundary_values(mesh, rng, amp):
    """Random trigonometric polynomial of the boundary angle, degree 5, decaying modes."""
    th = np.angle(mesh.z[:mesh.n_boundary])
    k = np.arange(1, 6)
    a, b = rng.normal(size=5) / k, rng.normal(size=5) / k
    return amp * (np.cos(np.outer(th, k)) @ a + np.sin(np.outer(th, k)) @ b)


def ordered_pairs(mesh, rng, count, scale=0.5):
    """Boundary data pairs ``(lo, hi)`` with ``hi >= lo`` at every boundary node.

    Even entries are side-value data (constant per side, linear along the
    chords): side values with standard deviation ``scale`` and gaps with
    standard deviation ``scale / 2``.  Odd entries are smooth data of
    amplitude ``scale`` plus a gap that is full (|g|), partial (max(g, 0))
    or constant, in turn.  At ``scale = 0.5`` the solutions stay ordered
    exactly; from ``scale = 1`` on, the discrete ordering can fail next to
    the boundary (see the decisions ledger).
    """
    from scherk.solver import BoundaryData

    out = []
    for i in range(count):
        if i % 2 == 0:
            lo = rng.normal(size=4) * scale
            hi = lo + np.abs(rng.normal(size=4)) * scale / 2
            out.append((BoundaryData.from_sides(mesh, lo), BoundaryData.from_sides(mesh, hi)))
            continue
        f = smooth_boundary_values(mesh, rng, scale)
        g = smooth_boundary_values(mesh, rng, scale)
        kind = (i // 2) % 3
        gap = (np.abs(g), np.maximum(g, 0), np.full(g.size, rng.uniform(0, scale)))[kind]
        out.append((BoundaryData(f), BoundaryData(f + gap)))
    return out


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance lines after the run."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
