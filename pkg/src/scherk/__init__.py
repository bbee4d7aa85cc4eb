"""Ideal Scherk graphs in H x R.

Subpackages
-----------
hypgeo
    Poincare disk geometry: Moebius maps, geodesics, horocycles, decorations.
polygon
    Ideal Scherk polygons and the admissibility check.
extend
    Extension by perturbed regular quadrilaterals and exhaustion.
meshing
    Truncated domains and their graded triangulations.
solver
    Truncated Dirichlet problems for the minimal surface equation.
flux
    Fluxes across arcs, cycles and the truncated boundary.
analysis
    Induced metric, ring moduli and total curvature of solved graphs.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .kernels import COMPILED  # noqa: E402

__all__ = ["__version__", "COMPILED"]
