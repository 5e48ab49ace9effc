"""Command line entry point.

Subcommands::

    alrbem solve    CONFIG   field grid CSV and a JSON summary for one instance
    alrbem sweep    CONFIG   loss sweep CSV and a JSON classification summary
    alrbem validate [CONFIG] oracle-vs-BEM and identity checks
    alrbem radii    r_c r_s [r_0]

Exit codes: 0 on success, 2 when a sweep classification is inconclusive,
1 on any error.

The configuration is JSON with the sections ``geometry``, ``medium``,
``source``, ``sweep`` and ``output``; see ``DEFAULTS`` for every key.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import resonance as rs
from .geometry import FlatSlabRegion, make_shell, shape_from_dict
from .medium import MediumParams
from .oracle import AnnulusConfig, annulus_solve, critical_radii
from .transmission import SourceSpec, h1_norm, solve

logger = logging.getLogger("alrbem")

DEFAULTS = {
    "geometry": {
        "engine": "bem",  # bem | annulus-series | ball-series
        "inner": {"kind": "circle", "radius": 2.0},
        "outer": {"kind": "circle", "radius": 4.0},
        "n_nodes": 256,
        "n_inner": None,
        "r_c": None,
        "r_s": None,
        "modes": 400,
        "slab": None,  # {"y1": ..., "R0": ..., "a": ...}
        "exclusion_radius": None,
        "standoff": None,
    },
    "medium": {"omega": 1.0, "mu0": 1.0, "a_e": 1.0, "eta": [0.5, 0.0], "b": 1.0,
               "dim": 2, "tau_convention": "inverse"},
    "source": [{"kind": "point", "location": [6.0, 0.0], "moment": None, "amplitude": [1.0, 0.0]}],
    "sweep": {"eta": None, "start": 1e-2, "stop": 1e-6, "count": 5, "ray": "imag",
              "workers": 1, "classify": "shell_h1", "thresholds": {}},
    "output": {"dir": ".", "prefix": "alrbem", "grid": {"xlim": [-8, 8], "ylim": [-8, 8], "n": 81}},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def load_config(path) -> dict:
    with open(path) as fh:
        raw = json.load(fh)
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    return _merge(DEFAULTS, raw)


def medium_from(cfg: dict) -> MediumParams:
    m = cfg["medium"]
    return MediumParams(float(m["omega"]), float(m["mu0"]), float(m["a_e"]), _complex(m["eta"]),
                        _complex(m["b"]), int(m["dim"]), m["tau_convention"])


def sources_from(cfg: dict) -> tuple:
    raw = cfg["source"]
    raw = [raw] if isinstance(raw, dict) else raw
    return tuple(SourceSpec(s.get("kind", "point"), tuple(s["location"]),
                            None if s.get("moment") is None else tuple(s["moment"]),
                            _complex(s.get("amplitude", 1.0))) for s in raw)


def problem_from(cfg: dict) -> rs.Problem:
    g = cfg["geometry"]
    slab = None if not g.get("slab") else FlatSlabRegion(**g["slab"])
    common = dict(medium=medium_from(cfg), sources=sources_from(cfg), modes=int(g["modes"]),
                  slab=slab, exclusion_radius=g["exclusion_radius"], standoff=g["standoff"])
    if g["engine"] == "bem":
        return rs.Problem("bem", inner=shape_from_dict(g["inner"]), outer=shape_from_dict(g["outer"]),
                          n_nodes=int(g["n_nodes"]), n_inner=g["n_inner"], **common)
    r_c = g["r_c"] if g["r_c"] is not None else g["inner"]["radius"]
    r_s = g["r_s"] if g["r_s"] is not None else g["outer"]["radius"]
    return rs.Problem(g["engine"], r_c=float(r_c), r_s=float(r_s), **common)


def _out_path(cfg: dict, suffix: str) -> Path:
    o = cfg["output"]
    d = Path(o["dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d / f"{o['prefix']}_{suffix}"


def cmd_solve(cfg: dict) -> int:
    prob = problem_from(cfg)
    grid = cfg["output"]["grid"]
    xs = np.linspace(*grid["xlim"], int(grid["n"]))
    ys = np.linspace(*grid["ylim"], int(grid["n"]))
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    summary = {"engine": prob.engine}
    if prob.engine == "bem":
        g1, g2 = make_shell(prob.inner, prob.outer, prob.n_inner or prob.n_nodes, prob.n_nodes)
        sol = solve(g1, g2, prob.medium, prob.sources)
        limit = 3 * max(g1.node_spacing, g2.node_spacing)
        ok = (g1.distance(pts) > limit) & (g2.distance(pts) > limit)
        for s in prob.sources:
            ok &= np.hypot(*(pts - s.location).T) > 1e-9
        from .transmission import classify_points
        regions = classify_points(g1, g2, pts)
        vals = np.full(len(pts), np.nan + 0j)
        vals[ok] = sol.fields(pts[ok], regions[ok])
        summary.update(condition_estimate=sol.condition_estimate, residual=sol.residual,
                       shell_h1=h1_norm(sol).value)
    elif prob.engine == "annulus-series":
        r0 = min(float(np.hypot(*s.location)) for s in prob.sources)
        sol = annulus_solve(AnnulusConfig(prob.r_c, prob.r_s, r0, modes=prob.modes), prob.medium,
                            prob.sources)
        r = np.hypot(pts[:, 0], pts[:, 1])
        regions = sol.region_of(r)
        ok = np.ones(len(pts), bool)
        for s in prob.sources:
            ok &= np.hypot(*(pts - s.location).T) > 1e-9
        vals = np.full(len(pts), np.nan + 0j)
        vals[ok] = sol.field(pts[ok])
        summary.update(modes=sol.n_modes, truncated=sol.truncated, shell_h1=sol.h1_norm())
    else:
        raise ValueError("solve supports the bem and annulus-series engines")
    path = _out_path(cfg, "field.csv")
    with open(path, "w") as fh:
        fh.write("# alrbem field v1\n")
        fh.write("x,y,re_u,im_u,abs_u,region\n")
        for p, v, reg in zip(pts, vals, regions):
            fh.write(f"{p[0]:.17g},{p[1]:.17g},{v.real:.17g},{v.imag:.17g},{abs(v):.17g},{reg}\n")
    rs.write_summary_json(_out_path(cfg, "solve.json"), summary)
    print(json.dumps({k: (v if not isinstance(v, complex) else [v.real, v.imag]) for k, v in summary.items()}))
    return 0


def cmd_sweep(cfg: dict) -> int:
    prob = problem_from(cfg)
    sw = cfg["sweep"]
    etas = [_complex(e) for e in sw["eta"]] if sw.get("eta") else \
        rs.log_spaced(float(sw["start"]), float(sw["stop"]), int(sw["count"]), sw["ray"])
    t0 = time.perf_counter()
    records = rs.eta_sweep(prob, etas, workers=int(sw.get("workers") or 1))
    logger.info("sweep of %d points took %.1f s", len(records), time.perf_counter() - t0)
    rs.write_sweep_csv(_out_path(cfg, "sweep.csv"), records)
    th = rs.Thresholds(**sw.get("thresholds", {}))
    try:
        cls = rs.classify(records, th, attr=sw.get("classify", "shell_h1"))
    except ValueError as exc:
        logger.error("classification not possible: %s", exc)
        cls = None
    summary = rs.sweep_summary(records, cls)
    rs.write_summary_json(_out_path(cfg, "summary.json"), summary)
    print(json.dumps(summary["classification"]))
    if cls is None or cls.label == "inconclusive":
        return 2
    return 0


def cmd_validate(cfg: dict | None) -> int:
    """Concentric-circle BEM vs series comparison plus operator identities."""
    from .boundary_ops import assemble_trace_ops, fourier_mode
    from .geometry import Circle, Ellipse, make_contour
    from .transmission import default_standoff

    results = {}
    c = make_contour(Circle(1.0), 128)
    v = assemble_trace_ops(c, 0, which=("V",))["V"].matrix
    results["circle_V_mode3"] = abs(fourier_mode(v @ np.exp(3j * c.t), 3) - 1 / 6)
    e = make_contour(Ellipse(4, 3), 256)
    o = assemble_trace_ops(e, 0, which=("V", "K", "Kstar"))
    results["calderon"] = float(np.abs(o["K"].matrix @ o["V"].matrix - o["V"].matrix @ o["Kstar"].matrix).max())
    med = MediumParams(omega=1.0, eta=0.5, b=1.0)
    src = SourceSpec("point", (6.0, 0.0))
    g1, g2 = make_shell(Circle(2.0), Circle(4.0), 128)
    sol = solve(g1, g2, med, src)
    ref = annulus_solve(AnnulusConfig(2.0, 4.0, 6.0), med, src)
    rng = np.random.default_rng(0)
    r = rng.uniform(2.6, 3.4, 50)
    t = rng.uniform(0, 2 * np.pi, 50)
    pts = np.column_stack([r * np.cos(t), r * np.sin(t)])
    ub, uo = sol.fields(pts, "shell"), ref.field(pts)
    results["oracle_shell_rel"] = float(np.abs(ub - uo).max() / np.abs(uo).max())
    d = default_standoff(sol)
    results["oracle_h1_rel"] = abs(h1_norm(sol).value - ref.h1_norm(2 + d, 4 - d)) / ref.h1_norm(2 + d, 4 - d)
    limits = {"circle_V_mode3": 1e-10, "calderon": 1e-8, "oracle_shell_rel": 1e-6, "oracle_h1_rel": 1e-4}
    ok = True
    for k, val in results.items():
        passed = val < limits[k]
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {k}: {val:.3e} (limit {limits[k]:.0e})")
    return 0 if ok else 1


def cmd_radii(r_c: float, r_s: float, r_0: float | None) -> int:
    cr = critical_radii(r_c, r_s, r_0)
    print(json.dumps({"r_star": cr.r_star, "r_sharp": cr.r_sharp, "r_crit": cr.r_crit,
                      "resonant_annuli": [list(a) for a in cr.resonant_annuli]}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alrbem", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep"):
        s = sub.add_parser(name)
        s.add_argument("config")
    s = sub.add_parser("validate")
    s.add_argument("config", nargs="?")
    s = sub.add_parser("radii")
    s.add_argument("r_c", type=float)
    s.add_argument("r_s", type=float)
    s.add_argument("r_0", type=float, nargs="?")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "radii":
            return cmd_radii(args.r_c, args.r_s, args.r_0)
        cfg = load_config(args.config) if getattr(args, "config", None) else None
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        return cmd_validate(cfg)
    except Exception as exc:  # noqa: BLE001 - map every failure onto exit code 1
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
