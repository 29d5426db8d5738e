"""Command-line front end.

Subcommands
-----------
solve        run one inversion (naive, binning-grid, binning-kmeans, density)
             from a JSON config; writes weights.csv, pushforward.csv, meta.json
diagnose     compute the predictability diagnostic for a density config
convergence  run the (n, p) convergence study from a spec file

Human-readable progress goes to stderr; stdout and files carry machine-
readable data only. Every run writes meta.json with the toolkit version, the
fully resolved config, all seeds, solver residuals, and wall-clock timing;
with the same config and seed all result files are byte-identical across
runs (wall-clock lives only in meta.json's "timing" block).

Exit codes: 0 success; 2 config error; 3 solver failure or
non-convergence; 4 unreachable cell; 5 diagnostic outside [0.8, 1.2]
(diagnose, or an untrustworthy convergence-study baseline).
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .binning import UnreachableCellError, make_regular_grid, solve_binning, solve_naive
from .config import ConfigError, build_convergence_spec, build_solve_config, load_config
from .core import Normalization, SampleSet, WeightedEdf, WeightVector, fit_box
from .density import solve_density
from .edf import wedf_eval_many
from .experiments import _jsonify, run_convergence
from .models import UniformBoxSampler
from .targets import is_exact

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_UNREACHABLE = 4
EXIT_DIAGNOSTIC = 5

METHODS = ("naive", "binning-grid", "binning-kmeans", "density")


def _log(msg):
    print(msg, file=sys.stderr)


def _default_threads():
    env = os.environ.get("DCINV_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _write_json(path, payload):
    with open(path, "w") as f:
        f.write(json.dumps(_jsonify(payload), sort_keys=True, indent=1) + "\n")


def _write_weights_csv(path, initial, predicted, weights):
    d_in = initial.shape[1]
    d_out = predicted.shape[1]
    header = (
        ["index"]
        + [f"x{k + 1}" for k in range(d_in)]
        + [f"q{k + 1}" for k in range(d_out)]
        + ["weight"]
    )
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for i in range(initial.shape[0]):
            row = (
                [str(i)]
                + [f"{v:.17g}" for v in initial[i]]
                + [f"{v:.17g}" for v in predicted[i]]
                + [f"{weights[i]:.17g}"]
            )
            f.write(",".join(row) + "\n")


def _write_pushforward_csv(path, pushforward, target_cdf, box, grid):
    axes = [np.linspace(box.lower[k], box.upper[k], grid) for k in range(box.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    f_method = wedf_eval_many(pushforward, pts)
    f_target = target_cdf(pts) if target_cdf is not None else None
    header = [f"q{k + 1}" for k in range(box.dim)] + ["f_method"]
    if f_target is not None:
        header.append("f_target")
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for i in range(pts.shape[0]):
            row = [f"{v:.17g}" for v in pts[i]] + [f"{f_method[i]:.17g}"]
            if f_target is not None:
                row.append(f"{f_target[i]:.17g}")
            f.write(",".join(row) + "\n")


def _target_cdf_callable(resolved):
    target = resolved.target
    if is_exact(target):
        return lambda pts: np.asarray(target.cdf(pts[:, 0] if pts.shape[1] == 1 else pts))
    observed = resolved.observed
    return lambda pts: wedf_eval_many(WeightedEdf.plain(observed), pts)


def _run_solve(method, cfg, out_dir, threads):
    t_start = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    meta = {
        "version": __version__,
        "method": method,
        "config": cfg.raw,
        "seed": cfg.seed,
        "threads": threads,
    }
    model = cfg.model
    if model.live:
        sampler = UniformBoxSampler(model.model.box)
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 10)))
        initial = sampler.sample(cfg.n_initial, rng)
        predicted = SampleSet(_eval(model.model, initial.points))
    else:
        initial, predicted = model.initial, model.predicted
    meta["n_initial"] = initial.n

    solver_meta = {}
    diagnostic_value = None
    if method == "naive":
        sol = solve_naive(
            model.model if model.live else None,
            initial,
            cfg.target.target,
            padding=cfg.padding,
            data_box=cfg.data_box,
            solver_tol=cfg.solver_tol,
            predicted_samples=predicted.points,
        )
        weights = sol.weights.weights
        pushforward = sol.pushforward()
        box = sol.box
        solver_meta = _solver_meta(sol.qp_solution)
        converged = sol.qp_solution.converged
        meta["weight_normalization"] = "mean_one"
    elif method in ("binning-grid", "binning-kmeans"):
        if method == "binning-grid":
            if cfg.partition_box is not None:
                cells = cfg.cells_per_dim or cfg.p
                partition = make_regular_grid(cfg.partition_box, cells)
            else:
                partition = ("grid", cfg.cells_per_dim or cfg.p)
        else:
            partition = ("kmeans", cfg.p)
        sol = solve_binning(
            model.model if model.live else None,
            UniformBoxSampler(model.model.box) if model.live else None,
            cfg.target.target,
            partition,
            n_target=cfg.n_initial if model.live else initial.n,
            seed=cfg.seed,
            n_batch=cfg.n_batch,
            min_fill=cfg.min_fill if model.live else "none",
            weight_floor=cfg.weight_floor,
            padding=cfg.padding,
            data_box=cfg.data_box,
            solver_tol=cfg.solver_tol,
            initial_samples=None if model.live else initial,
            predicted_samples=None if model.live else predicted.points,
        )
        initial, predicted = sol.initial, sol.predicted
        weights = sol.sample_weights.weights
        pushforward = sol.pushforward_samples()
        box = sol.box
        solver_meta = _solver_meta(sol.qp_solution)
        converged = sol.qp_solution.converged
        meta.update(
            {
                "weight_normalization": "sum_one",
                "p": sol.p,
                "partition_kind": sol.partition.kind,
                "n_batches": sol.n_batches,
                "n_total": sol.n,
                "cell_counts_min": int(sol.counts.min()),
            }
        )
    elif method == "density":
        observed = cfg.target.observed_or_fail
        sol = solve_density(initial, predicted, observed, rule=cfg.kde_rule)
        weights = sol.update_weights()
        pushforward = WeightedEdf(predicted, WeightVector(weights, Normalization.SUM_ONE))
        box = fit_box(predicted.points, padding=cfg.padding)
        diagnostic_value = sol.diagnostic
        converged = True
        meta.update(
            {
                "weight_normalization": "sum_one",
                "diagnostic": sol.diagnostic,
                "violations": sol.n_violations,
                "kde_rule": str(cfg.kde_rule),
                "m_observed": observed.n,
            }
        )
    else:
        raise ConfigError("/method", f"unknown method {method!r}")

    meta["solver"] = solver_meta
    _write_weights_csv(os.path.join(out_dir, "weights.csv"), initial.points, predicted.points, weights)
    _write_pushforward_csv(
        os.path.join(out_dir, "pushforward.csv"),
        pushforward,
        _target_cdf_callable(cfg.target),
        box,
        cfg.pushforward_grid,
    )
    meta["timing"] = {"wall_clock_s": time.perf_counter() - t_start}
    _write_json(os.path.join(out_dir, "meta.json"), meta)
    if diagnostic_value is not None:
        _log(f"diagnostic: {diagnostic_value:.6f}")
    if not converged:
        _log("solver did not converge; results flagged in meta.json")
        return EXIT_NONCONVERGED
    return EXIT_OK


def _solver_meta(qp_solution):
    return {
        "converged": qp_solution.converged,
        "iterations": qp_solution.iterations,
        "method": qp_solution.method,
        "stationarity_residual": qp_solution.kkt.stationarity_residual,
        "feasibility_residual": qp_solution.kkt.feasibility_residual,
        "complementarity_residual": qp_solution.kkt.complementarity_residual,
        "objective": qp_solution.objective,
    }


def _eval(model, pts):
    vals = np.asarray(model(pts), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return vals


def _cmd_solve(args):
    from .solver import NonPositiveDefiniteError

    cfg = build_solve_config(load_config(args.config), base_dir=os.path.dirname(args.config) or ".")
    try:
        return _run_solve(args.method, cfg, args.out, args.threads)
    except UnreachableCellError as exc:
        _log(f"unreachable cell: {exc}")
        return EXIT_UNREACHABLE
    except NonPositiveDefiniteError as exc:
        _log(f"solver failure: {exc}")
        return EXIT_NONCONVERGED


def _cmd_diagnose(args):
    cfg = build_solve_config(load_config(args.config), base_dir=os.path.dirname(args.config) or ".")
    model = cfg.model
    if model.live:
        sampler = UniformBoxSampler(model.model.box)
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 10)))
        initial = sampler.sample(cfg.n_initial, rng)
        predicted = SampleSet(_eval(model.model, initial.points))
    else:
        initial, predicted = model.initial, model.predicted
    observed = cfg.target.observed_or_fail
    sol = solve_density(initial, predicted, observed, rule=cfg.kde_rule)
    print(json.dumps({"diagnostic": sol.diagnostic, "violations": sol.n_violations}))
    return EXIT_OK if 0.8 <= sol.diagnostic <= 1.2 else EXIT_DIAGNOSTIC


def _cmd_convergence(args):
    spec = build_convergence_spec(load_config(args.spec), base_dir=os.path.dirname(args.spec) or ".")
    t_start = time.perf_counter()
    try:
        result = run_convergence(spec, progress=_log, threads=args.threads)
    except RuntimeError as exc:
        _log(f"aborted: {exc}")
        return EXIT_DIAGNOSTIC
    paths = result.save(args.out)
    _write_json(
        os.path.join(args.out, "meta.json"),
        {
            "version": __version__,
            "spec": result.spec_dict,
            "files": [os.path.basename(p) for p in paths],
            "threads": args.threads,
            "timing": {"wall_clock_s": time.perf_counter() - t_start},
        },
    )
    _log(f"wrote {len(paths) + 1} files to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dcinv",
        description="Data-consistent inversion via optimally weighted EDFs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one inversion from a JSON config")
    p_solve.add_argument("--method", required=True, choices=METHODS)
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", required=True)
    p_solve.add_argument("--threads", type=int, default=_default_threads())
    p_solve.set_defaults(func=_cmd_solve)

    p_diag = sub.add_parser("diagnose", help="predictability diagnostic for a density config")
    p_diag.add_argument("--config", required=True)
    p_diag.set_defaults(func=_cmd_diagnose)

    p_conv = sub.add_parser("convergence", help="run the (n, p) convergence study")
    p_conv.add_argument("--spec", required=True)
    p_conv.add_argument("--out", required=True)
    p_conv.add_argument("--threads", type=int, default=_default_threads())
    p_conv.set_defaults(func=_cmd_convergence)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _log(f"config error at {exc.pointer}: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
