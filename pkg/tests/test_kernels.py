import os
import subprocess
import sys

import numpy as np
import pytest

from scherk import _fallback, kernels
from scherk.meshing import triangulate, truncate
from scherk.solver import QUAD_WEIGHTS, Assembly

from conftest import random_polygon

compiled = pytest.importorskip("scherk._kernels", reason="extension not built")


def _sorted_scan(out):
    masks, sides, margins, n_enum, n_shared = out
    order = np.lexsort((sides, masks))
    return masks[order], sides[order], margins[order], n_enum, n_shared


@pytest.mark.parametrize("n", [4, 6, 10, 14])
def test_scan_matches_fallback(rng, n):
    G = random_polygon(rng, n)
    L = np.ascontiguousarray(G.lengths())
    a = _sorted_scan(compiled.scan_inscribed(n, G.a_offset, L))
    b = _sorted_scan(_fallback.scan_inscribed(n, G.a_offset, L))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert np.allclose(a[2], b[2], rtol=0, atol=1e-12)
    assert a[3:] == b[3:]


@pytest.mark.parametrize("hessian", [True, False])
def test_assemble_matches_fallback(square, hessian):
    mesh = triangulate(truncate(square, 2), 0.3)
    asm = Assembly.build(mesh)
    u = np.sin(3 * mesh.nodes[:, 0]) * np.cos(2 * mesh.nodes[:, 1])
    args = (u, mesh.triangles, asm.gx, asm.gy, asm.area, asm.lam, QUAD_WEIGHTS, hessian)
    a, b = compiled.assemble(*args), _fallback.assemble(*args)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        if x is None:
            assert y is None
        else:
            assert np.allclose(x, y, rtol=1e-12, atol=1e-12)


def test_selector_prefers_the_extension():
    assert kernels.COMPILED
    assert kernels.assemble is compiled.assemble


def test_pure_python_run_gives_the_same_check():
    """A fresh interpreter with the fallback forced reaches the same verdict."""
    code = ("from scherk import kernels; from scherk.extend import attach_pair; "
            "from scherk.polygon import ScherkPolygon, check_admissibility; "
            "r = check_admissibility(attach_pair(ScherkPolygon.regular(4))[0]); "
            "print(kernels.COMPILED, r.status, len(r.violations))")
    env = dict(os.environ, SCHERK_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.split()
    assert out == ["False", "equality", "4"]
