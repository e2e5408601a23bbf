"""Command-line front end.

Exit codes: 0 success, 2 usage or invalid parameters, 3 numerical failure,
4 sweep finished with failed cells.  Outputs go to ``--out`` or, by default,
to ``$MSCLIMATE_OUT`` (falling back to ./msclimate-out).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import bifurcation as B
from . import equilibria as E
from . import io
from . import melnikov as M
from .errors import AtThreshold, BoundaryPoint, InvalidParameters, NumericalError
from .integrate import (IntegratorConfig, estimate_cycle, integrate, random_initial_state)
from .models import (KYR_PER_TIME_UNIT, AsymParams, Model, MsParams, SymParams, UnfoldParams)

OUT_ENV = "MSCLIMATE_OUT"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4

_MODELS = {"ms": Model.MS, "sym": Model.SYM, "asym": Model.ASYM, "rotated": Model.ROTATED,
           "unfolded": Model.UNFOLDED}


class UsageError(Exception):
    pass


def _out_dir(args) -> Path:
    import os
    return Path(args.out or os.environ.get(OUT_ENV) or "msclimate-out")


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing required flags: " + ", ".join("--" + m.replace("_", "-")
                                                               for m in missing))


def _build_params(model: Model, args):
    if model is Model.MS:
        _need(args, "p", "q", "r")
        return MsParams(args.p, args.q, args.r, args.s or 0.0).validate()
    if model is Model.SYM:
        _need(args, "p", "r")
        return SymParams(args.p, args.r)
    if model in (Model.ASYM, Model.ROTATED):
        _need(args, "p", "r")
        return AsymParams(args.p, args.r, args.s or 0.0)
    _need(args, "lam", "mu", "eta")
    return UnfoldParams(args.lam, args.mu, args.eta)


def _config(args) -> IntegratorConfig:
    return IntegratorConfig(method=args.method, step=args.step, atol=args.atol, rtol=args.rtol,
                            t_end=args.t_end, max_steps=args.max_steps)


def _axis(spec: str, n: int) -> np.ndarray:
    """'a..b' with n points: a + (b - a) i / n for i = 1..n (left-open)."""
    try:
        a, b = (float(v) for v in spec.split(".."))
    except ValueError:
        raise UsageError(f"axis must look like 0..3, got {spec!r}")
    if n < 1 or not b > a:
        raise UsageError(f"bad axis {spec!r} with n={n}")
    return a + (b - a) * np.arange(1, n + 1) / n


# --- subcommands -----------------------------------------------------------

def cmd_simulate(args) -> tuple[int, list, dict]:
    model = _MODELS[args.model]
    params = _build_params(model, args)
    config = _config(args)
    given = [args.x0, args.y0] + ([args.z0] if model is Model.MS else [])
    seed = None
    if all(v is not None for v in given):
        y0 = np.array(given, dtype=float)
    elif any(v is not None for v in given):
        raise UsageError("give all initial components or none")
    else:
        seed = args.seed
        y0 = random_initial_state(seed, model.dim)
    rec = integrate(model, params, y0, config, seed=seed)
    out = _out_dir(args)
    files = [io.atomic_write(out / "orbit.csv", io.orbit_csv(rec)),
             io.atomic_write(out / "orbit.json", io.dumps_json(io.orbit_dict(rec)))]
    summary = {"final_state": [float(v) for v in rec.final_state], "points": len(rec)}
    if args.cycle:
        cyc = estimate_cycle(model, params, rec.final_state, config=config.replace(atol=1e-10, rtol=1e-10, t_end=200.0))
        summary["cycle"] = cyc.to_dict()
        summary["period_kyr"] = cyc.period * KYR_PER_TIME_UNIT
        print(f"period {cyc.period:.6f} time units ({cyc.period * KYR_PER_TIME_UNIT:.2f} Kyr), "
              f"{cyc.stability}, max x {cyc.amplitude_x:.6f}")
    if args.svg:
        names = io._STATE_NAMES[model.dim]
        series = [(rec.times, rec.states[:, k], names[k]) for k in range(model.dim)]
        files.append(io.atomic_write(out / "orbit.svg",
                                     io.svg_lines(series, ylabel="state", title=args.model)))
    print(f"final state {summary['final_state']}")
    return EXIT_OK, files, {"params": params.to_dict(), "seed": seed,
                            "config": config.to_dict(), "summary": summary}


def cmd_analyze(args) -> tuple[int, list, dict]:
    variant = args.variant
    model = _MODELS[variant]
    params = _build_params(model, args)
    reps = E.find_equilibria(model, params)
    report = {"variant": variant, "params": params.to_dict(),
              "equilibria": [r.to_dict() for r in reps]}
    bt = [r.label for r in reps
          if all(abs(z) < E.NONHYPERBOLIC_TOL for z in r.eigenvalues[:2])]
    report["bt"] = bt
    if variant in ("sym", "asym"):
        try:
            reg = E.region_classify(params, variant)
            report["region"] = {"label": reg.label, "notes": list(reg.notes),
                                "stable": sorted((E.SYM_STABLE if variant == "sym"
                                                  else E.ASYM_STABLE)[reg.label])}
        except BoundaryPoint as exc:
            report["region"] = {"label": None, "boundary": list(exc.curves)}
    out = _out_dir(args)
    files = [io.atomic_write(out / "analysis.json", io.dumps_json(report))]
    print(io.dumps_json(report), end="")
    return EXIT_OK, files, {"params": params.to_dict()}


def cmd_melnikov(args) -> tuple[int, list, dict]:
    out = _out_dir(args)
    if args.task == "rcurve":
        lo = args.x_from if args.x_from is not None else (1.01 if args.mu_sign > 0 else 0.05)
        hi = args.x_to if args.x_to is not None else 3.0
        xs = np.linspace(lo, hi, args.n)
        if args.mu_sign > 0 and lo < M.SQRT2 < hi:
            xs = np.unique(np.append(xs, M.SQRT2))
        curve = M.R_curve(args.mu_sign, xs)
        files = [io.atomic_write(out / "rcurve.csv", io.rcurve_csv(curve))]
        print(f"{len(curve)} samples written; monotone runs: {curve.metadata['monotone_runs']}")
        return EXIT_OK, files, {"mu_sign": args.mu_sign, "x": [lo, hi, args.n]}
    if args.task == "fold":
        xs, lam = M.find_fold(1.0)
        res = {"x_star": xs, "lambda_star": float(lam),
               "slope_fold": M_slope(lam), "slope_homoclinic": M_slope(M.HOMOCLINIC_LAMBDA)}
        files = [io.atomic_write(out / "fold.json", io.dumps_json(res))]
        print(f"x* = {xs:.7f}  lambda* = {lam:.7f}  fold slope {res['slope_fold']:.4f}")
        return EXIT_OK, files, {}
    if args.lam is None:
        raise UsageError("census needs --lambda")
    cen = M.cycle_census_unfolded(args.lam, args.mu_sign)
    res = {"lambda": args.lam, "mu_sign": args.mu_sign, "counts": cen.counts(),
           "cycles": [{"x": c.x, "kind": c.kind, "stability": c.stability,
                       "multiplicity": c.multiplicity} for c in cen.cycles]}
    files = [io.atomic_write(out / "census.json", io.dumps_json(res))]
    print(json.dumps(res["counts"], sort_keys=True))
    return EXIT_OK, files, {}


def M_slope(lam: float) -> float:
    from .models import pencil_slope
    return pencil_slope(lam, 1.0)


def cmd_sweep(args) -> tuple[int, list, dict]:
    model = _MODELS[args.model]
    if model not in (Model.MS, Model.SYM, Model.ASYM):
        raise UsageError("sweep supports ms, sym and asym")
    fixed = {}
    if model is Model.MS:
        _need(args, "q")
        MsParams(1.0, args.q, 1.0, args.s or 0.0).validate()
        fixed = {"q": args.q, "s": args.s or 0.0}
    elif model is Model.ASYM:
        _need(args, "s")
        fixed = {"s": args.s}
    p_axis, r_axis = _axis(args.p_axis, args.n), _axis(args.r_axis, args.n)
    config = IntegratorConfig(method=args.method, step=args.step, atol=args.atol, rtol=args.rtol,
                              t_end=args.t_end, max_steps=args.max_steps)
    grid = B.sweep_xbar(model, fixed, p_axis, r_axis, args.seed, config)
    out = _out_dir(args)
    files = io.write_sweep(grid, out)
    if args.svg:
        files.append(io.atomic_write(out / "sweep.svg", io.svg_heatmap(grid)))
    code = EXIT_OK
    if grid.failures:
        print(f"warning: {grid.failures} of {grid.values.size} cells flagged", file=sys.stderr)
        code = EXIT_PARTIAL
    print(f"sweep {grid.values.shape} written, {grid.failures} flagged cells")
    return code, files, {"seed": args.seed, "fixed": fixed, "config": config.to_dict(),
                         "failures": grid.failures}


def cmd_trace(args) -> tuple[int, list, dict]:
    s = args.s or 0.0
    rng = (args.p_from, args.p_to)
    if args.kind == "hopf":
        curves = B.hopf_curves(args.variant, s)
    elif args.kind == "homoclinic":
        curves = [B.trace_homoclinic(args.variant, s, rng, args.step, args.branch)]
    elif args.kind == "fold":
        curves = [B.trace_cycle_fold(args.variant, s, rng, args.step)]
    else:
        if args.variant != "sym":
            raise UsageError("subpartition is defined for the sym variant")
        curves = B.region3_subpartition().curves(rng, args.step)
    out = _out_dir(args)
    files = [io.atomic_write(out / "curves.csv", io.curves_csv(curves)),
             io.atomic_write(out / "curves.json",
                             io.dumps_json([c.to_dict() for c in curves]))]
    if args.svg:
        files.append(io.atomic_write(out / "curves.svg", io.svg_curves(curves)))
    for c in curves:
        near = int(np.argmax(c.p)) if args.kind in ("homoclinic", "fold") else 0
        extra = ""
        if args.kind in ("homoclinic", "fold") and c.p[near] != 1.0:
            extra = f", chord slope at (1,1) {(c.r[near] - 1.0) / (c.p[near] - 1.0):.4f}"
        print(f"{c.kind.value} ({c.association}): {len(c)} points{extra}")
    return EXIT_OK, files, {"s": s}


def cmd_replay(args) -> tuple[int, list, dict]:
    man = json.loads(Path(args.manifest).read_text())
    if man.get("tool_version") != __version__:
        print(f"warning: manifest from version {man.get('tool_version')}", file=sys.stderr)
    out = Path(args.out) if args.out else Path(args.manifest).parent / "replay"
    argv = list(man["argv"])
    if "--out" in argv:
        k = argv.index("--out")
        del argv[k:k + 2]
    code = main(argv + ["--out", str(out)])
    mismatched = []
    for entry in man["outputs"]:
        name = Path(entry["path"]).name
        mine = out / name
        if not mine.exists() or io.sha256(mine) != entry["sha256"]:
            mismatched.append(name)
    if mismatched:
        print("replay differs: " + ", ".join(mismatched), file=sys.stderr)
        return EXIT_NUMERIC, [], {"mismatched": mismatched}
    print(f"replay identical ({len(man['outputs'])} files)")
    return code, [], {"mismatched": []}


# --- parser ----------------------------------------------------------------

def _add_params(p):
    for name in ("p", "q", "r", "s"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--eta", type=float)


def _add_integrator(p, t_end=100.0, tol=1e-9):
    p.add_argument("--method", choices=["rk45", "rk4"], default="rk45")
    p.add_argument("--step", type=float, default=1e-2)
    p.add_argument("--atol", type=float, default=tol)
    p.add_argument("--rtol", type=float, default=tol)
    p.add_argument("--t-end", type=float, default=t_end)
    p.add_argument("--max-steps", type=int, default=20_000_000)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="msclimate",
                                 description="Maasch-Saltzman model analysis toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="integrate one trajectory")
    sp.add_argument("--model", choices=sorted(_MODELS), required=True)
    _add_params(sp)
    for name in ("x0", "y0", "z0"):
        sp.add_argument(f"--{name}", type=float)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cycle", action="store_true", help="also locate the limit cycle")
    sp.add_argument("--svg", action="store_true")
    _add_integrator(sp)
    sp.set_defaults(func=cmd_simulate)

    an = sub.add_parser("analyze", help="equilibria, stability and region")
    an.add_argument("--variant", choices=["ms", "sym", "asym"], required=True)
    _add_params(an)
    an.set_defaults(func=cmd_analyze)

    me = sub.add_parser("melnikov", help="R-curve, fold and cycle census")
    me.add_argument("task", choices=["rcurve", "fold", "census"])
    me.add_argument("--from", dest="x_from", type=float)
    me.add_argument("--to", dest="x_to", type=float)
    me.add_argument("--n", type=int, default=200)
    me.add_argument("--mu-sign", type=float, choices=[1.0, -1.0], default=1.0)
    me.add_argument("--lambda", dest="lam", type=float)
    me.set_defaults(func=cmd_melnikov)

    sw = sub.add_parser("sweep", help="x-bar over a (p, r) grid")
    sw.add_argument("--model", choices=["ms", "sym", "asym"], required=True)
    sw.add_argument("--q", type=float)
    sw.add_argument("--s", type=float)
    sw.add_argument("--p", dest="p_axis", default="0..3")
    sw.add_argument("--r", dest="r_axis", default="0..3")
    sw.add_argument("--n", type=int, default=60)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--svg", action="store_true")
    _add_integrator(sw, t_end=500.0, tol=1e-8)
    sw.set_defaults(func=cmd_sweep)

    tr = sub.add_parser("trace", help="bifurcation curves")
    tr.add_argument("--variant", choices=["sym", "asym"], required=True)
    tr.add_argument("--kind", choices=["hopf", "homoclinic", "fold", "subpartition"],
                    required=True)
    tr.add_argument("--s", type=float)
    tr.add_argument("--p-from", type=float, default=0.9)
    tr.add_argument("--p-to", type=float, default=0.999)
    tr.add_argument("--step", type=float, default=0.01)
    tr.add_argument("--branch", choices=["auto", "left", "right"], default="auto")
    tr.add_argument("--svg", action="store_true")
    tr.set_defaults(func=cmd_trace)

    rp = sub.add_parser("replay", help="re-run a manifest and compare outputs")
    rp.add_argument("manifest")
    rp.set_defaults(func=cmd_replay)

    for p in (sp, an, me, sw, tr, rp):
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./msclimate-out)")
    return ap


def _write_manifest(args, argv, files, extra, wall) -> Path:
    out = _out_dir(args)
    man = {"schema": io.SCHEMA_VERSION, "subcommand": args.command, "argv": list(argv),
           "tool_version": __version__, "wall_clock_s": wall,
           "outputs": [{"path": str(Path(f).name), "sha256": io.sha256(f)} for f in files]}
    man.update(extra)
    return io.atomic_write(out / f"manifest-{args.command}.json", io.dumps_json(_jsonable(man)))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        code, files, extra = args.func(args)
    except (UsageError, InvalidParameters, AtThreshold) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.command != "replay":
        _write_manifest(args, argv, files, extra, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
