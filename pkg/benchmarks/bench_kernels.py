"""Compiled kernels against the numpy fallback.

Run ``python3 benchmarks/bench_kernels.py [--repeat R]``.  For each kernel the
script times both implementations on the same inputs, checks that the
outputs agree and prints one line per case with the speed-up.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from scherk import _fallback
from scherk.meshing import triangulate, truncate
from scherk.polygon import ScherkPolygon
from scherk.solver import QUAD_WEIGHTS, Assembly

try:
    from scherk import _kernels
except ImportError:  # extension not built
    _kernels = None


def scan_case(n: int):
    rng = np.random.default_rng(n)
    gaps = rng.uniform(0.5, 1.5, n)
    theta = 2 * np.pi * np.cumsum(gaps) / gaps.sum()
    G = ScherkPolygon.from_angles(sorted(theta % (2 * np.pi), reverse=True))
    L = np.ascontiguousarray(G.lengths())
    return f"scan_inscribed n={n}", (n, G.a_offset, L)


def assemble_case(level: int, h: float):
    mesh = triangulate(truncate(ScherkPolygon.regular(4), level), h)
    asm = Assembly.build(mesh)
    u = np.sin(3 * mesh.nodes[:, 0]) * np.cos(2 * mesh.nodes[:, 1])
    args = (np.ascontiguousarray(u), mesh.triangles, asm.gx, asm.gy, asm.area, asm.lam,
            QUAD_WEIGHTS, True)
    return f"assemble triangles={mesh.n_triangles}", args


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.shape == b.shape and np.allclose(a, b, rtol=1e-12, atol=1e-12)
    return np.isclose(a, b, rtol=1e-12, atol=1e-12)


def _canonical(fn: str, out):
    """The scan returns polygons in implementation order; sort them by (mask, side)."""
    if fn != "scan_inscribed":
        return out
    masks, sides, margins, n_enum, n_shared = out
    order = np.lexsort((sides, masks))
    return masks[order], sides[order], margins[order], n_enum, n_shared


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", action="store_true", help="print results as JSON")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not available; only the fallback can run", file=sys.stderr)
        return 1
    cases = [(name, "scan_inscribed", a) for name, a in (scan_case(12), scan_case(16), scan_case(20))]
    cases += [(name, "assemble", a) for name, a in (assemble_case(3, 0.25), assemble_case(5, 0.1))]
    results = []
    for name, fn, a in cases:
        fast, slow = getattr(_kernels, fn), getattr(_fallback, fn)
        agree = _same(_canonical(fn, fast(*a)), _canonical(fn, slow(*a)))
        t_fast = min(timeit.repeat(lambda: fast(*a), number=1, repeat=args.repeat))
        t_slow = min(timeit.repeat(lambda: slow(*a), number=1, repeat=args.repeat))
        results.append({"case": name, "compiled_s": t_fast, "fallback_s": t_slow,
                        "speedup": t_slow / t_fast, "outputs_agree": bool(agree)})
    if args.json:
        print(json.dumps(results, indent=2))
    else:
        for r in results:
            print(f"{r['case']:<32} compiled {r['compiled_s']:9.4f}s  fallback {r['fallback_s']:9.4f}s"
                  f"  x{r['speedup']:7.1f}  agree={r['outputs_agree']}")
    return 0 if all(r["outputs_agree"] for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
