"""Convergence study over (n, p) grids and side-by-side method comparisons.

The convergence study estimates the probability of a data-space event B and
a parameter-space event A from the binned solution at every (n, p) pair,
over repeated trials, against reference values computed once with the
density-based method at large n. Within a trial the initial sample sets are
nested: the n-sample set is the first n rows of the largest set, matching
the appended-sampling construction. All randomness flows from one base seed
through keyed SeedSequence streams ((seed, 0) observed samples, (seed, 1, t)
baseline trials, (seed, 2, t) study trials), so results are reproducible bit
for bit and trials can run in any order or in parallel.
"""

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .assembly import assemble_qp
from .binning import (
    PIPELINE_PADDING,
    distribute_cell_weights,
    make_kmeans,
    make_regular_grid,
    solve_binning,
    solve_naive,
)
from .core import BoxScaler, Normalization, SampleSet, WeightedEdf, WeightVector, fit_box
from .density import solve_density, update_probability
from .edf import edf_eval_many, l2_distance, sup_distance
from .models import HeatRod, UniformBoxSampler, heat_rod_observed
from .solver import solve_qp
from .targets import EmpiricalTarget, as_target, is_exact

DIAGNOSTIC_GUARD = (0.8, 1.2)


def _as_box(region):
    if isinstance(region, BoxScaler):
        return region
    bounds = np.atleast_2d(np.asarray(region, dtype=float))
    return BoxScaler(bounds[:, 0], bounds[:, 1])


@dataclass(frozen=True)
class ConvergenceSpec:
    """Configuration of the convergence study.

    region_b defaults to the numerically computed image of region_a under
    the model (the interval hull over a fine grid of region_a).
    """

    n_grid: tuple = (1000, 3000, 10000)
    p_grid: tuple = (20, 60, 160)
    trials: int = 20
    seed: int = 0
    region_a: tuple = ((2.01, 2.02), (0.95, 1.0))
    region_b: tuple = None
    partition_kind: str = "grid"
    model: object = field(default_factory=HeatRod)
    target: object = field(default_factory=heat_rod_observed)
    m_observed: int = 100_000
    baseline_n: int = 100_000
    baseline_trials: int = 10
    weight_floor: float = 1e-6
    padding: float = PIPELINE_PADDING

    def __post_init__(self):
        n_grid = tuple(int(n) for n in self.n_grid)
        p_grid = tuple(int(p) for p in self.p_grid)
        if len(n_grid) == 0 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
            raise ValueError(f"n_grid must be strictly increasing, got {n_grid}")
        if len(p_grid) == 0 or any(b <= a for a, b in zip(p_grid, p_grid[1:])):
            raise ValueError(f"p_grid must be strictly increasing, got {p_grid}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.partition_kind not in ("grid", "kmeans"):
            raise ValueError(f"unknown partition kind {self.partition_kind!r}")
        object.__setattr__(self, "n_grid", n_grid)
        object.__setattr__(self, "p_grid", p_grid)
        object.__setattr__(
            self, "region_a", tuple(tuple(map(float, b)) for b in self.region_a)
        )
        if self.region_b is not None:
            object.__setattr__(
                self,
                "region_b",
                tuple(tuple(map(float, b)) for b in np.atleast_2d(self.region_b)),
            )


def derive_image_region(model, region_a, per_dim=81):
    """Interval hull of the model image of an axis-aligned parameter box."""
    box = _as_box(region_a)
    axes = [np.linspace(box.lower[k], box.upper[k], per_dim) for k in range(box.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    vals = _eval_model(model, grid)
    return tuple((float(vals[:, k].min()), float(vals[:, k].max())) for k in range(vals.shape[1]))


def _eval_model(model, pts):
    vals = np.asarray(model(pts), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return vals


def _jsonify(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonify(v) for v in value]
    return value


@dataclass(frozen=True)
class ConvergenceResult:
    """Estimates, error surfaces, and reproducibility metadata of one study."""

    spec_dict: dict
    region_a: tuple
    region_b: tuple
    baselines: dict
    estimates: dict  # name -> (trials, len(n_grid), len(p_grid)) array
    surfaces: dict  # name -> (len(n_grid), len(p_grid)) array
    n_grid: tuple
    p_grid: tuple

    def to_dict(self):
        return {
            "kind": "convergence_study",
            "version": __version__,
            "spec": self.spec_dict,
            "region_a": [list(b) for b in self.region_a],
            "region_b": [list(b) for b in self.region_b],
            "baselines": self.baselines,
            "n_grid": list(self.n_grid),
            "p_grid": list(self.p_grid),
            "estimates": {k: np.asarray(v).tolist() for k, v in sorted(self.estimates.items())},
            "surfaces": {k: np.asarray(v).tolist() for k, v in sorted(self.surfaces.items())},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def save(self, out_dir):
        """Write result.json and one CSV per surface (rows n, columns p)."""
        os.makedirs(out_dir, exist_ok=True)
        paths = [os.path.join(out_dir, "result.json")]
        with open(paths[0], "w") as f:
            f.write(self.to_json())
        for name, surface in sorted(self.surfaces.items()):
            path = os.path.join(out_dir, f"surface_{name}.csv")
            with open(path, "w") as f:
                f.write("n," + ",".join(f"p={p}" for p in self.p_grid) + "\n")
                for i, n in enumerate(self.n_grid):
                    row = ",".join(f"{float(surface[i][j]):.17g}" for j in range(len(self.p_grid)))
                    f.write(f"{n},{row}\n")
            paths.append(path)
        return paths


def _spec_dict(spec):
    return _jsonify(
        {
            "n_grid": list(spec.n_grid),
            "p_grid": list(spec.p_grid),
            "trials": spec.trials,
            "seed": spec.seed,
            "region_a": [list(b) for b in spec.region_a],
            "partition_kind": spec.partition_kind,
            "model": repr(spec.model),
            "target": repr(spec.target),
            "m_observed": spec.m_observed,
            "baseline_n": spec.baseline_n,
            "baseline_trials": spec.baseline_trials,
            "weight_floor": spec.weight_floor,
            "padding": spec.padding,
        }
    )


def _baseline_trial(args):
    model, observed_pts, baseline_n, region_a, seed_key = args
    rng = np.random.default_rng(np.random.SeedSequence(seed_key))
    sampler = UniformBoxSampler(model.box)
    initial = sampler.sample(baseline_n, rng)
    predicted = SampleSet(_eval_model(model, initial.points))
    sol = solve_density(initial, predicted, SampleSet(observed_pts), method="binned")
    p_a = update_probability(_as_box(region_a), initial.points, sol.r_values).self_normalized
    return float(sol.diagnostic), float(p_a)


def _study_trial(args):
    (model, observed_pts, n_grid, p_grid, partition_kind, region_a, region_b,
     weight_floor, padding, seed, t) = args
    qp_target = EmpiricalTarget(SampleSet(observed_pts))
    box_a = _as_box(region_a)
    box_b = _as_box(region_b)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 2, t)))
    sampler = UniformBoxSampler(model.box)
    initial_full = sampler.sample(n_grid[-1], rng).points
    predicted_full = _eval_model(model, initial_full)
    box = fit_box(predicted_full, padding=padding)
    out = np.empty((3, len(n_grid), len(p_grid)))
    for i, n in enumerate(n_grid):
        lam = initial_full[:n]
        q = predicted_full[:n]
        in_a = box_a.contains(lam)
        in_b = box_b.contains(q)
        for j, p in enumerate(p_grid):
            if partition_kind == "grid":
                part = make_regular_grid(box, p)
            else:
                part = make_kmeans(q, p, seed=(seed * 1_000_003 + 7 * t) % 2**31)
            problem = assemble_qp(
                np.clip(box.scale(part.reps.points), 0.0, 1.0), qp_target, box=box
            )
            w = solve_qp(problem).w
            assignments = part.classify_many(q)
            u, w_floored, _counts, _dropped = distribute_cell_weights(
                w, assignments, part.p, weight_floor=weight_floor, strict=False
            )
            reps_in_b = box_b.contains(part.reps.points)
            out[0, i, j] = np.sum(w_floored[reps_in_b]) / part.p
            out[1, i, j] = np.sum(u[in_b])
            out[2, i, j] = np.sum(u[in_a])
    return out


def _run_tasks(fn, payloads, threads):
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, payloads))
    return [fn(p) for p in payloads]


def run_convergence(spec, progress=None, threads=1):
    """Run the full convergence study.

    Raises RuntimeError when a baseline trial's diagnostic leaves
    [0.8, 1.2], reporting the value. ``threads`` distributes trials over
    processes; the reduction order is fixed by trial index either way.
    """
    model = spec.model
    target = as_target(spec.target)
    region_b = spec.region_b or derive_image_region(model, spec.region_a)
    box_b = _as_box(region_b)

    if is_exact(target):
        obs_rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 0)))
        observed = target.sample(spec.m_observed, obs_rng)
    else:
        observed = target.samples
    p_obs_b = float(np.mean(box_b.contains(observed.points)))
    p_obs_b_exact = None
    if is_exact(target) and box_b.dim == 1:
        lo, hi = region_b[0]
        p_obs_b_exact = float(
            np.asarray(target.cdf(np.array([hi])))[0] - np.asarray(target.cdf(np.array([lo])))[0]
        )

    baseline_payloads = [
        (model, observed.points, spec.baseline_n, spec.region_a, (spec.seed, 1, t))
        for t in range(spec.baseline_trials)
    ]
    diagnostics, p_update_trials = [], []
    for t, (diag, p_a) in enumerate(_run_tasks(_baseline_trial, baseline_payloads, threads)):
        if not DIAGNOSTIC_GUARD[0] <= diag <= DIAGNOSTIC_GUARD[1]:
            raise RuntimeError(
                f"baseline diagnostic {diag:.4f} outside {list(DIAGNOSTIC_GUARD)}; "
                "reference probabilities are not trustworthy"
            )
        diagnostics.append(diag)
        p_update_trials.append(p_a)
        if progress:
            progress(f"baseline trial {t + 1}/{spec.baseline_trials}: diagnostic={diag:.4f}")
    p_update_a = float(np.mean(p_update_trials))

    study_payloads = [
        (model, observed.points, spec.n_grid, spec.p_grid, spec.partition_kind,
         spec.region_a, region_b, spec.weight_floor, spec.padding, spec.seed, t)
        for t in range(spec.trials)
    ]
    results = []
    for t, res in enumerate(_run_tasks(_study_trial, study_payloads, threads)):
        results.append(res)
        if progress:
            progress(f"trial {t + 1}/{spec.trials} done")
    stacked = np.stack(results)  # (trials, 3, n, p)
    est_pred_b = stacked[:, 0]
    est_pred_b_samples = stacked[:, 1]
    est_init_a = stacked[:, 2]

    def _std(a):
        return a.std(axis=0, ddof=1) if spec.trials > 1 else np.zeros(a.shape[1:])

    surfaces = {
        "abs_err_pred_b": np.abs(est_pred_b.mean(axis=0) - p_obs_b),
        "std_pred_b": _std(est_pred_b),
        "abs_err_pred_b_samples": np.abs(est_pred_b_samples.mean(axis=0) - p_obs_b),
        "abs_err_init_a": np.abs(est_init_a.mean(axis=0) - p_update_a),
        "std_init_a": _std(est_init_a),
    }
    baselines = _jsonify(
        {
            "p_obs_b": p_obs_b,
            "p_obs_b_exact": p_obs_b_exact,
            "p_update_a": p_update_a,
            "p_update_a_trials": p_update_trials,
            "diagnostics": diagnostics,
            "n": spec.baseline_n,
            "m": observed.n,
            "trials": spec.baseline_trials,
            "kde_evaluation": "binned",
            "seed_keys": [[spec.seed, 1, t] for t in range(spec.baseline_trials)],
            "observed_seed_key": [spec.seed, 0] if is_exact(target) else None,
        }
    )
    return ConvergenceResult(
        spec_dict=_spec_dict(spec),
        region_a=spec.region_a,
        region_b=tuple(region_b),
        baselines=baselines,
        estimates={
            "pred_b": est_pred_b,
            "pred_b_samples": est_pred_b_samples,
            "init_a": est_init_a,
        },
        surfaces=surfaces,
        n_grid=spec.n_grid,
        p_grid=spec.p_grid,
    )


METHOD_NAMES = ("unweighted", "naive", "binning-grid", "binning-kmeans", "density")


def compare_methods(
    model,
    target,
    n,
    m,
    p,
    seed,
    methods=METHOD_NAMES,
    initial_sampler=None,
    partition=None,
    kde_rule="scott",
    grid_per_dim=2048,
    padding=PIPELINE_PADDING,
    min_fill="none",
):
    """Push-forward accuracy table for the requested methods.

    Draws n initial samples and m observed samples under ``seed``, runs each
    method on the shared data, and reports L2 and sup-norm distances of each
    method's data-space push-forward to the target CDF, the variance of its
    mean-one-scale weights, and, for the density row, the diagnostic.
    Binning rows carry the sample-level push-forward distances plus the
    representative-point variants (l2_reps, sup_reps).
    """
    sampler = initial_sampler or UniformBoxSampler(model.box)
    target = as_target(target)

    initial = sampler.sample(n, np.random.default_rng(np.random.SeedSequence((seed, 10))))
    predicted = SampleSet(_eval_model(model, initial.points))
    if is_exact(target):
        observed = target.sample(m, np.random.default_rng(np.random.SeedSequence((seed, 11))))
    else:
        observed = target.samples

    box = fit_box(predicted.points, padding=padding)
    if is_exact(target):
        target_cdf = lambda pts: np.asarray(target.cdf(pts[:, 0] if box.dim == 1 else pts))
    else:
        target_cdf = lambda pts: edf_eval_many(observed, pts)

    def distances(pushforward, extra):
        return (
            l2_distance(pushforward, target_cdf, box, grid_per_dim),
            sup_distance(pushforward, target_cdf, box, grid_per_dim, extra_points=extra),
        )

    rows = []
    for name in methods:
        row = {"method": name, "n": int(n), "m": int(m), "seed": int(seed)}
        if name == "unweighted":
            pf = WeightedEdf.plain(predicted)
            row["l2"], row["sup"] = distances(pf, predicted.points)
            row["weight_variance"] = 0.0
        elif name == "naive":
            sol = solve_naive(
                model, initial, target, padding=padding, predicted_samples=predicted.points
            )
            row["l2"], row["sup"] = distances(sol.pushforward(), predicted.points)
            row["weight_variance"] = float(np.var(sol.weights.weights))
            row["solver_residual"] = sol.qp_solution.kkt.stationarity_residual
        elif name in ("binning-grid", "binning-kmeans"):
            part = partition
            if part is None:
                part = ("grid", p) if name == "binning-grid" else ("kmeans", p)
            sol = solve_binning(
                model, None, target, part, n_target=n, seed=seed,
                padding=padding, min_fill=min_fill,
                initial_samples=initial, predicted_samples=predicted.points,
            )
            row["l2"], row["sup"] = distances(sol.pushforward_samples(), sol.predicted.points)
            reps_pf = WeightedEdf(sol.partition.reps, sol.cell_weights)
            row["l2_reps"], row["sup_reps"] = distances(reps_pf, sol.partition.reps.points)
            row["weight_variance"] = float(np.var(sol.n * sol.sample_weights.weights))
            row["p"] = int(sol.p)
            row["solver_residual"] = sol.qp_solution.kkt.stationarity_residual
        elif name == "density":
            sol = solve_density(initial, predicted, SampleSet(observed.points), rule=kde_rule)
            weights = sol.update_weights()
            pf = WeightedEdf(predicted, WeightVector(weights, Normalization.SUM_ONE))
            row["l2"], row["sup"] = distances(pf, predicted.points)
            row["weight_variance"] = float(np.var(n * weights))
            row["diagnostic"] = float(sol.diagnostic)
            row["violations"] = sol.n_violations
        else:
            raise ValueError(f"unknown method {name!r}")
        rows.append(_jsonify(row))
    return rows


def write_comparison(rows, out_dir):
    """Write comparison rows as CSV and JSON; returns the file paths."""
    os.makedirs(out_dir, exist_ok=True)
    keys = []
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    csv_path = os.path.join(out_dir, "comparison.csv")
    with open(csv_path, "w") as f:
        f.write(",".join(keys) + "\n")
        for row in rows:
            f.write(
                ",".join(
                    ""
                    if k not in row
                    else (f"{row[k]:.17g}" if isinstance(row[k], float) else str(row[k]))
                    for k in keys
                )
                + "\n"
            )
    json_path = os.path.join(out_dir, "comparison.json")
    with open(json_path, "w") as f:
        f.write(json.dumps(rows, sort_keys=True, indent=1) + "\n")
    return [csv_path, json_path]
