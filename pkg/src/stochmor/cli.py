"""Batch driver: build / reduce / distance / bounds / simulate / sweep.

Every subcommand reads a model from a named preset or a JSON manifest and
writes its artifacts (Matrix Market models, JSON reports, CSV tables) into
an output directory.  Reruns with identical flags and seed are
byte-identical.  The environment variable ``STOCHMOR_THREADS`` caps the
number of parallel sweep rows (default 1).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import irka, metrics, modelio, sdesim, wavebench
from .errors import StochmorError
from .irka import IRKAOptions, ReductionResult, TwoStepReduction
from .matrixeq import SolveOptions
from .system import StateSpaceModel, validate_model


def _parse_input_spec(spec):
    kind, _, value = spec.partition(":")
    val = float(value)
    if kind == "const":
        return lambda t: val
    if kind == "exp":
        return lambda t: np.exp(val * t)
    raise ValueError(f"unknown input spec {spec!r} (use const:<c> or exp:<rate>)")


def _load_model_arg(args):
    if args.preset:
        config = wavebench.preset_config(
            args.preset, n=args.n, output_kind=args.output,
            epsilon=args.epsilon)
        model = wavebench.build_wave_model(config)
        default_u = wavebench.PRESETS[args.preset]["u"]
    else:
        model = modelio.load_model(args.model)
        default_u = "const:1"
    violations = validate_model(model)
    if violations:
        raise ValueError("invalid model: " + "; ".join(violations))
    u_spec = args.u if getattr(args, "u", None) else default_u
    return model, u_spec


def _check_algorithm(model, algorithm):
    compatible = {
        "bilinear_irka": "multiplicative",
        "two_step": "additive",
        "one_step": "additive",
    }
    if algorithm not in compatible:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if model.kind != compatible[algorithm]:
        raise ValueError(
            f"algorithm {algorithm!r} requires a {compatible[algorithm]} "
            f"model, got kind={model.kind!r}")


def _irka_opts(args, seed=None):
    return IRKAOptions(
        tol=args.tol, max_iter=args.max_iter,
        seed=args.seed if seed is None else seed,
        solve_opts=SolveOptions(tol=max(min(args.tol * 1e-2, 1e-8), 1e-12)))


def _reduce(model, args, seed=None):
    opts = _irka_opts(args, seed=seed)
    if args.algorithm == "bilinear_irka":
        if args.r is None:
            raise ValueError("--r is required for bilinear_irka")
        return irka.reduce_bilinear_irka(model, args.r, opts=opts)
    if args.algorithm == "one_step":
        if args.r is None:
            raise ValueError("--r is required for one_step")
        return irka.reduce_one_step(model, args.r, opts=opts)
    r1 = args.r1 if args.r1 is not None else args.r
    r2 = args.r2 if args.r2 is not None else args.r
    if r1 is None or r2 is None:
        raise ValueError("--r1/--r2 (or --r) are required for two_step")
    return irka.reduce_two_step(model, r1, r2, opts=opts)


def _residuals(model, reduction, algorithm):
    if algorithm == "bilinear_irka":
        return {"system": irka.optimality_residuals(model, reduction)}
    Ksqrt = metrics.sqrtm_psd(model.K)
    if algorithm == "two_step":
        sub1 = metrics.deterministic_subsystem(model)
        sub2 = metrics.noise_subsystem(model)
        red2 = reduction.part2.reduced
        red2 = StateSpaceModel(A=red2.A, B1=red2.B2, C=red2.C)
        return {
            "part1": irka.optimality_residuals(sub1, reduction.part1.reduced),
            "part2": irka.optimality_residuals(sub2, red2, W=Ksqrt),
        }
    # one_step: stacked system with block weight
    red = reduction.reduced
    full = StateSpaceModel(A=model.A, B1=np.hstack([model.B1, model.B2]),
                           C=model.C)
    stacked = StateSpaceModel(A=red.A, B1=np.hstack([red.B1, red.B2]), C=red.C)
    import scipy.linalg as spla
    W = spla.block_diag(np.eye(model.m1), Ksqrt)
    return {"system": irka.optimality_residuals(full, stacked, W=W)}


def _load_reduction(path):
    path = Path(path)
    if (path / "part1").is_dir():
        return TwoStepReduction(part1=_load_reduction(path / "part1"),
                                part2=_load_reduction(path / "part2"))
    red_dir = path / "reduced" if (path / "reduced").is_dir() else path
    model = modelio.load_model(red_dir)
    info_path = path / "reduction.json"
    info = json.loads(info_path.read_text()) if info_path.exists() else {}
    V = modelio.load_matrix(path / "V.mtx") if (path / "V.mtx").exists() else None
    Wb = modelio.load_matrix(path / "Wb.mtx") if (path / "Wb.mtx").exists() else None
    return ReductionResult(
        reduced=model, V=V, Wb=Wb, history=[],
        converged=bool(info.get("converged", True)),
        iterations=int(info.get("iterations", 0)))


def _save_reduction_any(reduction, out):
    out = Path(out)
    if isinstance(reduction, TwoStepReduction):
        modelio.save_reduction(reduction.part1, out / "part1")
        modelio.save_reduction(reduction.part2, out / "part2")
        return out
    return modelio.save_reduction(reduction, out)


def cmd_build(args):
    model, _ = _load_model_arg(args)
    out = Path(args.out)
    modelio.save_model(model, out, metadata={"preset": args.preset or ""})
    print(f"model written to {out}")


def cmd_reduce(args):
    model, _ = _load_model_arg(args)
    _check_algorithm(model, args.algorithm)
    reduction = _reduce(model, args)
    out = Path(args.out)
    _save_reduction_any(reduction, out)
    res = _residuals(model, reduction, args.algorithm)
    modelio.write_json(res, out / "residuals.json")
    converged = (reduction.part1.converged and reduction.part2.converged
                 if isinstance(reduction, TwoStepReduction)
                 else reduction.converged)
    print(f"reduction written to {out} (converged={converged})")


def cmd_distance(args):
    model, _ = _load_model_arg(args)
    reduction = _load_reduction(args.reduced)
    reduced = reduction.reduced
    report = metrics.l2w_distance(model, reduced)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    modelio.write_json({
        "distance": report.distance, "tr_full": report.tr_full,
        "tr_red": report.tr_red, "tr_cross": report.tr_cross,
        "distance_sq_raw": report.distance_sq_raw,
    }, out / "distance.json")
    print(f"distance = {report.distance:.6e}")


def _compute_bounds(model, reduction, u, T):
    u_norm = metrics.input_l2_norm(u, T)
    return metrics.additive_bounds(model, reduction, u_norm=u_norm)


def cmd_bounds(args):
    model, u_spec = _load_model_arg(args)
    if model.kind != "additive":
        raise ValueError("bounds requires an additive model")
    reduction = _load_reduction(args.reduced)
    u = _parse_input_spec(u_spec)
    b = _compute_bounds(model, reduction, u, args.T)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    modelio.write_json(b, out / "bounds.json")
    mode = "additive_two_step" if b.E3 is None else "additive_one_step"
    bound = metrics.output_error_bound(b, b.u_norm, mode)
    modelio.write_csv(
        [[b.E1, b.E2, b.E3 if b.E3 is not None else float("nan"),
          b.u_norm, bound]],
        out / "bounds.csv", ["E1", "E2", "E3", "u_norm", "output_bound"])
    print(f"E1={b.E1:.6e} E2={b.E2:.6e} "
          f"E3={'-' if b.E3 is None else format(b.E3, '.6e')} bound={bound:.6e}")


def cmd_simulate(args):
    model, u_spec = _load_model_arg(args)
    u = _parse_input_spec(u_spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"settings": {
        "preset": args.preset or "", "algorithm": args.algorithm or "",
        "seed": args.seed, "dt": args.dt, "paths": args.paths, "T": args.T,
        "u": u_spec,
    }}

    if args.reduced:
        reduction = _load_reduction(args.reduced)
    else:
        if not args.algorithm:
            raise ValueError("either --reduced or --algorithm is required")
        _check_algorithm(model, args.algorithm)
        reduction = _reduce(model, args)
        _save_reduction_any(reduction, out / "reduced_model")
        res = _residuals(model, reduction, args.algorithm)
        modelio.write_json(res, out / "residuals.json")
        converged = (reduction.part1.converged and reduction.part2.converged
                     if isinstance(reduction, TwoStepReduction)
                     else reduction.converged)
        summary["converged"] = converged

    u_norm = metrics.input_l2_norm(u, args.T)
    if model.kind == "additive":
        b = metrics.additive_bounds(model, reduction, u_norm=u_norm)
        mode = "additive_two_step" if b.E3 is None else "additive_one_step"
        bound = metrics.output_error_bound(b, u_norm, mode)
        modelio.write_csv(
            [[b.E1, b.E2, b.E3 if b.E3 is not None else float("nan"),
              u_norm, bound]],
            out / "bounds.csv", ["E1", "E2", "E3", "u_norm", "output_bound"])
        summary["bounds"] = {"E1": b.E1, "E2": b.E2, "E3": b.E3}
    else:
        reduced = reduction.reduced if hasattr(reduction, "reduced") else reduction
        report = metrics.l2w_distance(model, reduced)
        bound = metrics.output_error_bound(report, u_norm, "multiplicative")
        summary["distance"] = report.distance
    summary["u_norm"] = u_norm
    summary["output_bound"] = bound

    grid = sdesim.TimeGrid(T=args.T, steps=int(round(args.T / args.dt)))
    paths = sdesim.sample_noise_paths(model.K, grid, args.paths, seed=args.seed)
    result = sdesim.simulate_pair(model, reduction, u, paths,
                                  scheme=args.scheme)
    est, se = sdesim.worst_case_mean_error(result)
    summary["sup_mean_error"] = est
    summary["sup_std_error"] = se
    modelio.write_csv(
        zip(result.t, result.mean_error_curve),
        out / "mean_error_curve.csv", ["t", "mean_error"])
    modelio.write_csv(
        [[t] + list(yf) + list(yr) for t, yf, yr in
         zip(result.t, result.y_full[0], result.y_reduced[0])],
        out / "trajectory_sample.csv",
        ["t"] + [f"y_full_{i}" for i in range(model.p)]
        + [f"y_reduced_{i}" for i in range(model.p)])
    modelio.write_json(summary, out / "summary.json")
    print(f"sup mean error = {est:.6e} (se {se:.2e}), bound = {bound:.6e}")


def _parse_r_list(spec):
    if not spec:
        raise ValueError("empty r list")
    values = []
    for tok in spec.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if ":" in tok:
            parts = [int(x) for x in tok.split(":")]
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            values.extend(range(start, stop + 1, step))
        else:
            values.append(int(tok))
    if not values:
        raise ValueError("empty r list")
    return sorted(set(values))


def _sweep_row(model, u, args, r):
    t0 = time.perf_counter()
    row = {"r": r, "distance": float("nan"), "E1": float("nan"),
           "E2": float("nan"), "E3": float("nan"),
           "sup_error": float("nan"), "std_error": float("nan"),
           "error": ""}
    try:
        ns = argparse.Namespace(**vars(args))
        ns.r = r
        ns.r1 = r
        ns.r2 = r
        reduction = _reduce(model, ns, seed=args.seed + r)
        u_norm = metrics.input_l2_norm(u, args.T)
        if model.kind == "additive":
            b = metrics.additive_bounds(model, reduction, u_norm=u_norm,
                                        check_stability=False)
            row["E1"], row["E2"] = b.E1, b.E2
            if b.E3 is not None:
                row["E3"] = b.E3
        else:
            reduced = reduction.reduced
            row["distance"] = metrics.l2w_distance(
                model, reduced, check_stability=False).distance
        if not args.skip_simulation:
            grid = sdesim.TimeGrid(T=args.T, steps=int(round(args.T / args.dt)))
            paths = sdesim.sample_noise_paths(model.K, grid, args.paths,
                                              seed=args.seed + r)
            result = sdesim.simulate_pair(model, reduction, u, paths,
                                          scheme=args.scheme)
            row["sup_error"], row["std_error"] = \
                sdesim.worst_case_mean_error(result)
    except (StochmorError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["runtime"] = time.perf_counter() - t0
    return row


def cmd_sweep(args):
    model, u_spec = _load_model_arg(args)
    _check_algorithm(model, args.algorithm)
    u = _parse_input_spec(u_spec)
    r_values = _parse_r_list(args.r_list)
    workers = max(1, int(os.environ.get("STOCHMOR_THREADS", "1")))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda r: _sweep_row(model, u, args, r),
                                 r_values))
    else:
        rows = [_sweep_row(model, u, args, r) for r in r_values]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["r", "distance", "E1", "E2", "E3", "sup_error", "std_error",
              "runtime", "error"]
    modelio.write_csv(
        [[row[h] for h in header] for row in rows], out / "sweep.csv", header)
    print(f"sweep table written to {out / 'sweep.csv'} ({len(rows)} rows)")


def _add_model_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(wavebench.PRESETS),
                     help="benchmark preset name")
    src.add_argument("--model", help="path to a model manifest")
    p.add_argument("--n", type=int, default=None,
                   help="override the preset state dimension")
    p.add_argument("--output", choices=["position", "velocity"],
                   default="position", help="preset output quantity")
    p.add_argument("--epsilon", type=float, default=0.05,
                   help="output window half-width for presets")


def _add_reduce_args(p, require_algorithm=True):
    p.add_argument("--algorithm",
                   choices=["bilinear_irka", "two_step", "one_step"],
                   required=require_algorithm)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--r1", type=int, default=None)
    p.add_argument("--r2", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=100)


def _add_sim_args(p):
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--u", default=None,
                   help="input signal, const:<c> or exp:<rate> "
                        "(default: the preset input)")
    p.add_argument("--scheme", choices=["explicit", "drift_implicit"],
                   default="explicit",
                   help="time stepping; drift_implicit is stable for stiff "
                        "oscillatory drifts at moderate dt")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stochmor",
        description="Optimization-based model order reduction for linear "
                    "stochastic systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="assemble a model and write its manifest")
    _add_model_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("reduce", help="compute a reduced model")
    _add_model_args(p)
    _add_reduce_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("distance", help="weighted L2 distance full vs reduced")
    _add_model_args(p)
    p.add_argument("--reduced", required=True,
                   help="directory written by `reduce`")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("bounds", help="additive error-bound terms E1/E2/E3")
    _add_model_args(p)
    p.add_argument("--reduced", required=True)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--u", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser(
        "simulate",
        help="Monte Carlo output-error estimate (end-to-end pipeline when "
             "--algorithm is given)")
    _add_model_args(p)
    _add_reduce_args(p, require_algorithm=False)
    _add_sim_args(p)
    p.add_argument("--reduced", default=None,
                   help="reuse a reduction directory instead of reducing")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="reduce/evaluate over a list of orders")
    _add_model_args(p)
    _add_reduce_args(p)
    _add_sim_args(p)
    p.add_argument("--r-list", dest="r_list", required=True,
                   help="orders, e.g. 2,4,6 or 2:18:2")
    p.add_argument("--skip-simulation", action="store_true",
                   help="bounds/distance only, no Monte Carlo")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (StochmorError, ValueError, OSError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
