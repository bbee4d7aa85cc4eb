"""Command-line interface.

Subcommands
-----------
check     admissibility report of a polygon (exit 0 / 2 / 3, 1 on bad input)
solve     truncated Dirichlet solutions for a list of cap values
flux      flux series, boundary balance audit and closed-cycle check
extend    one extension step
exhaust   several extension steps and the distance trace
modulus   ring moduli and total curvature of the solved graphs

Every output file embeds the run configuration: JSON files under the key
``"config"``, CSV files on a leading ``# config:`` line, SVG files in
``<metadata>``, mesh files on a ``#`` comment line and solution files in
their JSON header.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import _svg
from .analysis import curvature_csv, curvature_series, distance_rings, induced_metric, ring_modulus
from .extend import LN_1_PLUS_SQRT2, ExtensionError, exhaust, extend_once
from .flux import balance_audit, flux_series, random_cycles
from .hypgeo import ORIGIN, GeometryError, hyperbolic_distances
from .meshing import DEFAULT_GRADING, DEFAULT_H, MeshError
from .polygon import PolygonError, PolygonSpecError, ScherkPolygon, TooLarge, check_admissibility
from .solver import NotAdmissible, SolverError, divergence_probe, scherk_sequence

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2
EXIT_EQUALITY = 3


@dataclass
class RunConfig:
    """Everything that determines the outputs of one command."""

    command: str
    polygon_source: str
    polygon: dict
    n_list: list = field(default_factory=list)
    mesh_h: float = DEFAULT_H
    grading: float = DEFAULT_GRADING
    level: int | None = None
    tau0: float = 1e-3
    steps: int = 3
    seed: int = 0
    allow_inadmissible: bool = False
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# helpers


def load_polygon(source: str) -> ScherkPolygon:
    """A polygon file, or ``square`` / ``regular:<n>`` for built-in regular polygons."""
    if source == "square":
        return ScherkPolygon.regular(4)
    if source.startswith("regular:"):
        try:
            n = int(source.split(":", 1)[1])
        except ValueError as exc:
            raise PolygonSpecError(f"bad built-in polygon {source!r}") from exc
        return ScherkPolygon.regular(n)
    try:
        return ScherkPolygon.load(source)
    except OSError as exc:
        raise PolygonSpecError(f"cannot read {source}: {exc.strerror}") from exc


def parse_n_list(text: str) -> list:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --n-list {text!r}") from exc
    if not vals or any(v <= 0 for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
        raise argparse.ArgumentTypeError("--n-list must be positive and increasing")
    return [int(v) if v.is_integer() else v for v in vals]


def _dump_json(path, data) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write(path, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _tag(n) -> str:
    """File-name tag of a cap value: 16.0 -> "16", 2.5 -> "2p5"."""
    n = float(n)
    return str(int(n)) if n.is_integer() else repr(n).replace(".", "p")


def _sequence(G: ScherkPolygon, cfg: RunConfig) -> list:
    return scherk_sequence(G, cfg.n_list, ORIGIN, h=cfg.mesh_h, grading=cfg.grading,
                           level=cfg.level, check=not cfg.allow_inadmissible)


# ---------------------------------------------------------------------------
# commands


def cmd_check(G: ScherkPolygon, cfg: RunConfig, out: str | None) -> int:
    rep = check_admissibility(G, "auto")
    data = {"config": cfg.to_dict(), "report": rep.to_dict()}
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if out:
        _write(os.path.join(out, "check.json"), text)
    return {"admissible": EXIT_OK, "violation": EXIT_VIOLATION, "equality": EXIT_EQUALITY}[rep.status]


def cmd_solve(G: ScherkPolygon, cfg: RunConfig, out: str) -> int:
    conf = cfg.to_dict()
    seq = _sequence(G, cfg)
    written = {}
    rows = []
    for sol in seq:
        lv = sol.meta["level"]
        mesh_name = f"mesh_L{lv}.txt"
        if mesh_name not in written:
            sol.mesh.save(os.path.join(out, mesh_name), ["config " + json.dumps(conf, sort_keys=True)])
            written[mesh_name] = True
        name = f"u_n{_tag(sol.meta['n'])}.bin"
        sol.save(os.path.join(out, name), mesh_name, conf)
        rows.append({"file": name, "mesh_file": mesh_name, **sol.summary()})
        levels = list(np.linspace(-0.9, 0.9, 13) * float(sol.meta["n"]))
        _svg.level_set_picture(sol, levels, f"level sets, n = {sol.meta['n']}", conf).save(
            os.path.join(out, f"levels_n{_tag(sol.meta['n'])}.svg"))
    summary = {"config": conf, "solutions": rows}
    if len(seq) >= 2:
        rep = divergence_probe(seq)
        summary["divergence"] = rep.to_dict()
        svg = _svg.domain_picture(seq[-1].mesh.domain, "divergence probe", conf)
        svg.dots(seq[-1].mesh.z[rep.marked], 1.2, "#e67e22")
        for g in rep.geodesics:
            a, b = (complex(math.cos(t), math.sin(t)) for t in g.endpoints)
            svg.geodesic(a, b, "#27ae60", 1.5)
        svg.save(os.path.join(out, "divergence.svg"))
    _dump_json(os.path.join(out, "solve.json"), summary)
    sys.stdout.write(json.dumps({"solutions": len(seq), "converged": all(s.converged for s in seq)},
                                sort_keys=True) + "\n")
    return EXIT_OK if all(s.converged for s in seq) else EXIT_ERROR


def cmd_flux(G: ScherkPolygon, cfg: RunConfig, out: str) -> int:
    conf = cfg.to_dict()
    seq = _sequence(G, cfg)
    dom = seq[0].mesh.domain
    first_a = dom.side_arcs("A")[0]
    rep = flux_series(seq, [first_a.marker], conf)
    _write(os.path.join(out, "flux.csv"), rep.to_csv())
    _write(os.path.join(out, "flux_all_arcs.csv"), flux_series(seq, None, conf).to_csv())
    audit = balance_audit(G, seq, conf)
    _write(os.path.join(out, "audit.json"), audit.to_json())
    _write(os.path.join(out, "audit.csv"), audit.to_csv())
    rng = np.random.default_rng(cfg.seed)
    cycles = []
    for sol in seq:
        for nodes, F, L in random_cycles(sol, rng, 20):
            cycles.append({"n": sol.meta["n"], "n_nodes": int(nodes.size), "flux": F, "length": L,
                           "ratio": abs(F) / L})
    _dump_json(os.path.join(out, "cycles.json"),
               {"config": conf, "cycles": cycles,
                "max_ratio": max(c["ratio"] for c in cycles)})
    last = rep.series(first_a.name)[-1]
    sys.stdout.write(json.dumps({"arc": first_a.name, "n": last["n"], "ratio": last["ratio"]},
                                sort_keys=True) + "\n")
    return EXIT_OK


def cmd_extend(G: ScherkPolygon, cfg: RunConfig, out: str) -> int:
    conf = cfg.to_dict()
    step = extend_once(G, ORIGIN, cfg.tau0)
    _dump_json(os.path.join(out, "extended.json"),
               {"config": conf, "polygon": step.child.to_spec(), "step": step.to_dict(),
                "regular_step": LN_1_PLUS_SQRT2})
    svg = _svg.polygon_picture(step.child, "extension", conf, width=1.0)
    _svg.polygon_picture(G, "", svg=svg, width=2.5)
    svg.save(os.path.join(out, "extend.svg"))
    sys.stdout.write(json.dumps({"vertices": step.child.n, "tau": step.tau,
                                 "status": step.report.status}, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_exhaust(G: ScherkPolygon, cfg: RunConfig, out: str) -> int:
    conf = cfg.to_dict()
    trace = exhaust(G, ORIGIN, cfg.steps, cfg.tau0)
    trace.dump(os.path.join(out, "trace.json"), {"config": conf})
    svg = _svg.Svg("exhaustion", conf)
    for k, D in enumerate(trace.domains):
        _svg.polygon_picture(D, "", svg=svg, width=max(0.4, 2.5 - 0.7 * k))
    svg.save(os.path.join(out, "exhaust.svg"))
    gains = np.diff(trace.distances).tolist()
    sys.stdout.write(json.dumps({"distances": trace.distances, "gains": gains}, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_modulus(G: ScherkPolygon, cfg: RunConfig, out: str, radii=None) -> int:
    conf = cfg.to_dict()
    seq = _sequence(G, cfg)
    _write(os.path.join(out, "curvature.csv"), curvature_csv(curvature_series(seq), conf))
    sol = seq[-1]
    dom = sol.mesh.domain
    if radii is None:
        # balls around the origin reaching into the cusps; each ring spans several triangles
        far = float(hyperbolic_distances(0j, sol.mesh.z).max())
        radii = list(np.linspace(min(0.5, 0.1 * far), 0.9 * far, 5))
    conf = {**conf, "radii": [float(r) for r in radii]}
    gm = induced_metric(sol)
    rings = distance_rings(sol.mesh, ORIGIN, radii)
    moduli = [ring_modulus(gm, r) for r in rings]
    whole = distance_rings(sol.mesh, ORIGIN, [radii[0], radii[-1]])[0]
    _dump_json(os.path.join(out, "rings.json"),
               {"config": conf, "n": sol.meta["n"],
                "convention": "M = 2*pi/E; the round annulus r<|z|<R has M = ln(R/r)",
                "radii": conf["radii"], "moduli": moduli,
                "whole_ring_modulus": ring_modulus(gm, whole)})
    svg = _svg.domain_picture(dom, "ring plates", conf)
    z = sol.mesh.z
    for r in rings:
        tri = sol.mesh.triangles[r.triangles]
        edge = np.isin(tri, r.inner).any(axis=1) & ~np.isin(tri, r.inner).all(axis=1)
        svg.dots(z[np.unique(tri[edge])], 0.8, "#8e44ad")
    svg.save(os.path.join(out, "rings.svg"))
    sys.stdout.write(json.dumps({"moduli": moduli}, sort_keys=True) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--polygon", required=True,
                        help='polygon JSON file {"vertices_rad": [...], "first_edge": "A"}, '
                             'or "square" / "regular:<n>"')
    common.add_argument("--out", default=None, help="output directory (created if missing)")
    common.add_argument("--seed", type=int, default=0, help="seed for random sampling")

    solving = argparse.ArgumentParser(add_help=False)
    solving.add_argument("--n-list", type=parse_n_list, default=[2, 4, 8, 16],
                         help="comma separated increasing cap values (default 2,4,8,16)")
    solving.add_argument("--mesh-h", type=float, default=DEFAULT_H,
                         help=f"target hyperbolic edge length (default {DEFAULT_H})")
    solving.add_argument("--level", type=int, default=None,
                         help="fixed truncation level shared by all cap values")
    solving.add_argument("--allow-inadmissible", action="store_true",
                         help="solve even when the admissibility check fails")

    extending = argparse.ArgumentParser(add_help=False)
    extending.add_argument("--tau0", type=float, default=1e-3, help="initial boundary perturbation")
    extending.add_argument("--steps", type=int, default=3, help="number of extension steps")

    p = argparse.ArgumentParser(prog="scherk", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="admissibility report")
    sub.add_parser("solve", parents=[common, solving], help="solve the truncated problems")
    sub.add_parser("flux", parents=[common, solving], help="flux series and balance audit")
    sub.add_parser("extend", parents=[common, extending], help="one extension step")
    sub.add_parser("exhaust", parents=[common, extending], help="exhaustion trace")
    mp = sub.add_parser("modulus", parents=[common, solving], help="ring moduli and curvature")
    mp.add_argument("--radii", type=parse_n_list, default=None,
                    help="increasing hyperbolic radii of the ring plates around the origin "
                         "(default: five radii spread over the truncated domain)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        G = load_polygon(args.polygon)
    except (PolygonSpecError, PolygonError) as exc:
        sys.stderr.write(f"scherk: {exc}\n")
        return EXIT_ERROR
    cfg = RunConfig(command=args.command, polygon_source=args.polygon, polygon=G.to_spec(),
                    seed=args.seed)
    for name in ("n_list", "mesh_h", "level", "tau0", "steps", "allow_inadmissible"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    out = args.out
    if out is None and args.command != "check":
        out = "."
    if out:
        os.makedirs(out, exist_ok=True)
    try:
        if args.command == "check":
            return cmd_check(G, cfg, out)
        if args.command == "solve":
            return cmd_solve(G, cfg, out)
        if args.command == "flux":
            return cmd_flux(G, cfg, out)
        if args.command == "extend":
            return cmd_extend(G, cfg, out)
        if args.command == "exhaust":
            return cmd_exhaust(G, cfg, out)
        return cmd_modulus(G, cfg, out, args.radii)
    except NotAdmissible as exc:
        sys.stderr.write(f"scherk: {exc}\n")
        return EXIT_VIOLATION
    except TooLarge as exc:
        sys.stderr.write(f"scherk: {exc}\n")
        return EXIT_ERROR
    except (GeometryError, MeshError, SolverError, ExtensionError, ValueError) as exc:
        sys.stderr.write(f"scherk: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
