"""Command line interface: scenario runner and CSV/JSON emitter.

Subcommands
-----------
solve           solve one obstacle instance, write a solution CSV
stationarity    assemble a multiplier bundle, print the residual table (JSON)
ssc             run one sufficiency certificate, print the report (JSON)
optimize        run an optimizer, write a trace CSV and print a final JSON
counterexample  evaluate one closed-form scenario over a t-grid (CSV + JSON)
sweep           solve a family of instances in parallel, write one CSV

Configs are JSON.  Coordinate-dependent entries (psi, y_D, g, u, u0, bounds)
are arithmetic expressions over x (interval), x and y (square) or r (disc).
Exit codes: 0 success, 1 invalid config/usage, 2 solver failure,
3 counterexample verdict not confirmed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import counterexamples as ce
from .expressions import ExpressionError, evaluate
from .grid import Grid, GridFn, GridError, SQUARE_2D
from .optimize import OptimizeResult, solve_general, solve_subharmonic
from .ssc import (certify_compat_global, certify_compat_local,
                  certify_enhanced_global, certify_enhanced_local,
                  certify_subharmonic_convex, classify_subharmonic)
from .stationarity import ObjectiveSpec, assemble_bundle, check_strong_stationarity
from .vi import ControlBounds, SolverError, solve_obstacle

FMT = "%.17g"


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    return FMT % float(x)


def _node_env(grid: Grid) -> dict:
    c = grid.coords
    if grid.kind == SQUARE_2D:
        return {"x": c[:, 0], "y": c[:, 1]}
    if grid.kind == "radial_disc":
        return {"r": c}
    return {"x": c}


def _eval_field(grid: Grid, expr, name: str) -> GridFn:
    if not isinstance(expr, str):
        expr = str(expr)
    try:
        vals = evaluate(expr, **_node_env(grid))
    except ExpressionError as exc:
        raise ConfigError(f"bad expression for {name!r}: {exc}") from exc
    return GridFn(grid, np.broadcast_to(np.asarray(vals, float),
                                        (grid.size,)).copy())


def _eval_bound(grid: Grid, expr, name: str) -> np.ndarray:
    if isinstance(expr, str) and expr.strip() in ("-inf", "inf"):
        return np.full(grid.size, float(expr))
    return _eval_field(grid, expr, name).values


def load_config(path: str):
    try:
        with open(path) as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    try:
        grid = Grid(cfg["grid"]["kind"], int(cfg["grid"]["n"]))
        alpha = float(cfg["alpha"])
        obj = cfg.get("objective", {})
        spec = ObjectiveSpec(
            mu_j=float(obj.get("mu_j", 0.0)),
            y_D=_eval_field(grid, obj.get("y_D", "0"), "y_D"),
            g=_eval_field(grid, obj.get("g", "0"), "g"),
            alpha=alpha,
        )
        psi = _eval_field(grid, cfg["psi"], "psi")
        b = cfg.get("bounds")
        bounds = ControlBounds(
            _eval_bound(grid, b.get("ua", "-inf"), "ua"),
            _eval_bound(grid, b.get("ub", "inf"), "ub"),
        ) if b else ControlBounds.unbounded(grid)
        u = _eval_field(grid, cfg["u"], "u") if "u" in cfg else None
        u0 = _eval_field(grid, cfg["u0"], "u0") if "u0" in cfg else None
        seed = int(cfg.get("seed", 0))
    except (KeyError, TypeError, ValueError, GridError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config: {exc}") from exc
    return {"grid": grid, "spec": spec, "psi": psi, "bounds": bounds,
            "u": u, "u0": u0, "seed": seed, "raw": cfg}


def _write_csv(path, header, rows):
    out = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    finally:
        if path:
            out.close()


def _coord_columns(grid: Grid):
    if grid.kind == SQUARE_2D:
        return ["x", "y"], [grid.coords[:, 0], grid.coords[:, 1]]
    name = "r" if grid.kind == "radial_disc" else "x"
    return [name], [grid.coords]


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    if cfg["u"] is None:
        raise ConfigError("solve requires a control entry 'u'")
    sol = solve_obstacle(cfg["u"], cfg["psi"])
    names, cols = _coord_columns(cfg["grid"])
    classes = np.where(sol.strictly_active, "strictly_active",
                       np.where(sol.biactive, "biactive", "inactive"))
    header = names + ["u", "psi", "y", "lambda", "contact"]
    data = cols + [cfg["u"].values, cfg["psi"].values,
                   sol.y.values, sol.lam.values]
    rows = [[col[i] for col in data] + [classes[i]]
            for i in range(cfg["grid"].size)]
    _write_csv(args.out, header, rows)
    return 0


def cmd_stationarity(args) -> int:
    cfg = load_config(args.config)
    if cfg["u"] is None:
        raise ConfigError("stationarity requires a control entry 'u'")
    bundle = assemble_bundle(cfg["spec"], cfg["u"], cfg["psi"], cfg["bounds"])
    report = check_strong_stationarity(bundle)
    print(json.dumps({
        "residuals": report.residuals,
        "scale": report.scale,
        "tol": report.tol,
        "is_strongly_stationary": report.is_strongly_stationary,
        "active_nodes": int(bundle.sol.active.sum()),
        "biactive_nodes": int(bundle.sol.biactive.sum()),
        "single_node_contact": bundle.sol.single_node_contact,
    }, indent=2))
    return 0


_SSC_DISPATCH = {
    "compat-local": certify_compat_local,
    "compat-global": certify_compat_global,
    "enhanced-local": certify_enhanced_local,
    "enhanced-global": certify_enhanced_global,
}


def cmd_ssc(args) -> int:
    cfg = load_config(args.config)
    if args.theorem == "subharmonic":
        report = certify_subharmonic_convex(cfg["spec"], cfg["psi"],
                                            cfg["bounds"])
    else:
        if cfg["u"] is None:
            raise ConfigError("ssc requires a control entry 'u'")
        bundle = assemble_bundle(cfg["spec"], cfg["u"], cfg["psi"],
                                 cfg["bounds"])
        report = _SSC_DISPATCH[args.theorem](bundle, seed=cfg["seed"])
    print(json.dumps({
        "theorem": report.theorem,
        "verdict": report.verdict,
        "witness": report.witness,
        "residuals": report.residuals,
        "n_directions": report.n_directions,
        "n_critical": report.n_critical,
        "min_curvature": report.min_curvature,
        "notes": report.notes,
    }, indent=2))
    return 0


def cmd_optimize(args) -> int:
    cfg = load_config(args.config)
    spec, psi, bounds = cfg["spec"], cfg["psi"], cfg["bounds"]
    grid = cfg["grid"]
    if args.method == "subharmonic":
        if not classify_subharmonic(psi):
            raise ConfigError("obstacle is not subharmonic; use --method general")
        rng = np.random.default_rng(cfg["seed"])
        results = [solve_subharmonic(spec, psi, bounds)]
        for _ in range(max(0, args.starts - 1)):
            start = {"obstacle": rng.random(grid.size) < 0.2}
            results.append(solve_subharmonic(spec, psi, bounds,
                                             start_active=start))
        result = min(results, key=lambda res: res.objective)
        spread = max(
            float(np.sqrt(np.sum(grid.weights
                                 * (res.u.values - result.u.values) ** 2)))
            for res in results)
        extra = {"starts": len(results), "max_start_distance": spread}
    else:
        result = solve_general(spec, psi, bounds, u0=cfg["u0"],
                               seed=cfg["seed"])
        extra = {"probes_taken": result.diagnostics.get("probes_taken")}
        history = result.diagnostics.get("history", [])
        if args.trace:
            _write_csv(args.trace, ["iteration", "objective"],
                       list(enumerate(history)))
    names, cols = _coord_columns(grid)
    if args.out:
        rows = [[c[i] for c in cols]
                + [result.u.values[i], result.y.values[i], psi.values[i]]
                for i in range(grid.size)]
        _write_csv(args.out, names + ["u", "y", "psi"], rows)
    print(json.dumps({
        "method": args.method,
        "objective": result.objective,
        "residual": result.residual,
        "iterations": result.iterations,
        "converged": result.converged,
        **extra,
    }, indent=2))
    return 0 if result.converged else 2


def cmd_counterexample(args) -> int:
    params = {}
    if args.param is not None:
        params = {"ce1": {"r": args.param}, "ce2": {"c": args.param},
                  "ce3": {"c": args.param}}[f"ce{args.scenario}"]
    scn = ce.build(f"ce{args.scenario}", n=args.n, **params)
    ts = np.linspace(args.tmin, args.tmax, args.tsteps)
    report = ce.verify_nonoptimality(scn, ts)
    rows = [(t, dist, gnum, "" if gcl is None else gcl, gnum / (t * t))
            for t, dist, gnum, gcl in report.rows]
    _write_csv(args.out, ["t", "control_dist", "gap_numeric",
                          "gap_closed_form", "ratio_gap_over_t2"], rows)
    print(json.dumps({
        "scenario": report.scenario,
        "params": scn.params,
        "confirmed": report.confirmed,
        "stationarity_residuals": report.stationarity_residuals,
        "fitted_t2_coefficient": report.fitted_t2_coefficient,
    }, indent=2))
    return 0 if report.confirmed else 3


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    raw = cfg["raw"]
    sweep = raw.get("sweep")
    if not sweep or "values" not in sweep:
        raise ConfigError("sweep config needs a 'sweep' entry with 'values'")
    scale_expr = sweep.get("scale_u", True)
    base_u = cfg["u"]
    if base_u is None:
        raise ConfigError("sweep requires a control entry 'u'")
    values = [float(v) for v in sweep["values"]]
    grid, psi, spec = cfg["grid"], cfg["psi"], cfg["spec"]

    def one(v: float):
        u = GridFn(grid, v * base_u.values) if scale_expr else base_u
        sol = solve_obstacle(u, psi)
        return (v, spec.objective(sol.y, u), float(sol.y.values.max()),
                int(sol.active.sum()), sol.kkt_residual)

    workers = int(os.environ.get("OBSTACLE_THREADS", os.cpu_count() or 1))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(one, values))
    _write_csv(args.out, ["value", "objective", "y_max", "active_nodes",
                          "kkt_residual"], rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obstacle-control", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn in (("solve", cmd_solve), ("stationarity", cmd_stationarity)):
        q = sub.add_parser(name)
        q.add_argument("--config", required=True)
        if name == "solve":
            q.add_argument("--out", default=None)
        q.set_defaults(fn=fn)

    q = sub.add_parser("ssc")
    q.add_argument("--config", required=True)
    q.add_argument("--theorem", required=True,
                   choices=sorted(_SSC_DISPATCH) + ["subharmonic"])
    q.set_defaults(fn=cmd_ssc)

    q = sub.add_parser("optimize")
    q.add_argument("--config", required=True)
    q.add_argument("--method", choices=["subharmonic", "general"],
                   default="general")
    q.add_argument("--starts", type=int, default=1)
    q.add_argument("--out", default=None)
    q.add_argument("--trace", default=None)
    q.set_defaults(fn=cmd_optimize)

    q = sub.add_parser("counterexample")
    q.add_argument("scenario", type=int, choices=[1, 2, 3])
    q.add_argument("--param", type=float, default=None)
    q.add_argument("--n", type=int, default=2047)
    q.add_argument("--tmin", type=float, default=0.01)
    q.add_argument("--tmax", type=float, default=0.2)
    q.add_argument("--tsteps", type=int, default=6)
    q.add_argument("--out", default=None)
    q.set_defaults(fn=cmd_counterexample)

    q = sub.add_parser("sweep")
    q.add_argument("--config", required=True)
    q.add_argument("--out", default=None)
    q.set_defaults(fn=cmd_sweep)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        return args.fn(args)
    except (ConfigError, ExpressionError, GridError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
