"""Partition the data space, fit cell weights by the QP, and distribute them
onto parameter samples.

The two-step method: (1) solve the weighted-EDF fitting QP on the partition's
representative points, giving one weight w_k per cell; (2) classify the
predicted samples into cells and give every sample in cell k the weight
u_i = w_k / (p n_k). Samples sharing a cell share a weight exactly, which is
what preserves the initially assumed conditional structure inside the
pre-image of each cell. Summed over a cell the u's reproduce w_k / p, so the
push-forward of the u-weighted parameter EDF through the cell classifier is
identical to the w-weighted EDF over the representative points.

Cell geometry is never materialized: a partition is its representative
points plus a total classifier.
"""

from dataclasses import dataclass

import numpy as np

from .assembly import assemble_qp
from .core import BoxScaler, Normalization, SampleSet, WeightedEdf, WeightVector, as_points, fit_box
from .solver import solve_qp
from .targets import as_target

DEFAULT_WEIGHT_FLOOR = 1e-6
DEFAULT_MAX_BATCHES = 1000
PIPELINE_PADDING = 1e-3  # keeps the extreme sample off the unit-box corner


class UnreachableCellError(RuntimeError):
    """A cell kept positive weight but no sampled model output reaches it.

    The target puts mass where the predicted samples never land, so the
    partition is too fine for the predicted sample density (or the model
    simply cannot produce that data). Reducing the number of bins is the
    usual fix.
    """

    def __init__(self, cells, weights):
        self.cells = list(map(int, cells))
        self.weights = [float(w) for w in weights]
        detail = ", ".join(
            f"cell {c} (weight {w:.3g})" for c, w in zip(self.cells, self.weights)
        )
        super().__init__(
            f"no predicted samples reach {detail}; reduce the number of bins "
            "or check that the target is reachable by the model"
        )


@dataclass(frozen=True)
class RegularGridPartition:
    """Half-open hyper-rectangles tiling a box; representatives are centers.

    Cells are [low, high) per dimension with the last cell closed;
    classification clamps points outside the box to the boundary cells, so
    the classifier is total.
    """

    box: BoxScaler
    cells_per_dim: tuple

    kind = "grid"

    def __post_init__(self):
        cells = tuple(int(c) for c in np.atleast_1d(self.cells_per_dim))
        if len(cells) != self.box.dim:
            raise ValueError(
                f"{len(cells)} cell counts for a {self.box.dim}-D box"
            )
        if any(c < 1 for c in cells):
            raise ValueError(f"cells_per_dim must be positive, got {cells}")
        object.__setattr__(self, "cells_per_dim", cells)

    @property
    def p(self):
        return int(np.prod(self.cells_per_dim))

    @property
    def reps(self):
        axes = [
            self.box.lower[k] + (np.arange(c) + 0.5) * self.box.width[k] / c
            for k, c in enumerate(self.cells_per_dim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return SampleSet(np.stack([m.ravel() for m in mesh], axis=1))

    def classify_many(self, points):
        pts = as_points(points)
        if pts.shape[1] != self.box.dim:
            raise ValueError(f"points dim {pts.shape[1]}, partition dim {self.box.dim}")
        idx = np.zeros(pts.shape[0], dtype=np.int64)
        for k, c in enumerate(self.cells_per_dim):
            rel = (pts[:, k] - self.box.lower[k]) / self.box.width[k]
            cell = np.clip(np.floor(rel * c).astype(np.int64), 0, c - 1)
            idx = idx * c + cell
        return idx


@dataclass(frozen=True)
class KMeansPartition:
    """Implicit Voronoi cells of k-means centroids; nearest-centroid classifier."""

    centroids: SampleSet
    inertia: float
    inertia_history: tuple
    seed: int
    n_iter: int

    kind = "kmeans"

    def __post_init__(self):
        if not isinstance(self.centroids, SampleSet):
            object.__setattr__(self, "centroids", SampleSet(self.centroids))

    @property
    def p(self):
        return self.centroids.n

    @property
    def reps(self):
        return self.centroids

    def classify_many(self, points):
        pts = as_points(points)
        c = self.centroids.points
        if pts.shape[1] != c.shape[1]:
            raise ValueError(f"points dim {pts.shape[1]}, centroids dim {c.shape[1]}")
        out = np.empty(pts.shape[0], dtype=np.int64)
        chunk = max(1, 4_000_000 // max(c.shape[0], 1))
        for start in range(0, pts.shape[0], chunk):
            block = pts[start : start + chunk]
            d2 = ((block[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)
            # argmin breaks ties toward the lowest centroid index
            out[start : start + block.shape[0]] = np.argmin(d2, axis=1)
        return out


def make_regular_grid(box, cells_per_dim):
    """Regular grid partition of ``box`` with the given cells per dimension."""
    if not isinstance(box, BoxScaler):
        bounds = np.asarray(box, dtype=float)
        box = BoxScaler(np.atleast_2d(bounds)[:, 0], np.atleast_2d(bounds)[:, 1])
    if np.isscalar(cells_per_dim):
        cells_per_dim = (int(cells_per_dim),) * box.dim
    return RegularGridPartition(box, tuple(cells_per_dim))


def _kmeans_pp_init(pts, p, rng):
    n = pts.shape[0]
    centroids = np.empty((p, pts.shape[1]))
    centroids[0] = pts[rng.integers(n)]
    d2 = ((pts - centroids[0]) ** 2).sum(axis=1)
    for k in range(1, p):
        total = d2.sum()
        if total <= 0:
            centroids[k] = pts[rng.integers(n)]
            continue
        centroids[k] = pts[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((pts - centroids[k]) ** 2).sum(axis=1))
    return centroids


def make_kmeans(samples, p, seed, max_iter=100):
    """Cluster samples with Lloyd's algorithm from a k-means++ start.

    Reproducible under ``seed``. An empty cluster is re-seeded at the point
    farthest from its assigned centroid. Requires at least p distinct points.
    """
    pts = as_points(samples)
    n_distinct = np.unique(pts, axis=0).shape[0]
    if p < 1:
        raise ValueError(f"p must be positive, got {p}")
    if n_distinct < p:
        raise ValueError(f"need at least p={p} distinct points, got {n_distinct}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(pts, p, rng)
    assignments = None
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _sq_dist(pts, centroids)
        new_assign = np.argmin(d2, axis=1)
        closest = d2[np.arange(pts.shape[0]), new_assign]
        for k in range(p):
            mask = new_assign == k
            if np.any(mask):
                centroids[k] = pts[mask].mean(axis=0)
            else:
                far = int(np.argmax(closest))
                centroids[k] = pts[far]
                new_assign[far] = k
                closest[far] = 0.0
        history.append(float(_sq_dist(pts, centroids)[np.arange(pts.shape[0]), new_assign].sum()))
        if assignments is not None and np.array_equal(new_assign, assignments):
            break
        assignments = new_assign
    return KMeansPartition(
        SampleSet(centroids), history[-1], tuple(history), int(seed), n_iter
    )


def _sq_dist(pts, centroids):
    chunk = max(1, 8_000_000 // max(centroids.shape[0], 1))
    out = np.empty((pts.shape[0], centroids.shape[0]))
    for start in range(0, pts.shape[0], chunk):
        block = pts[start : start + chunk]
        out[start : start + block.shape[0]] = (
            (block[:, None, :] - centroids[None, :, :]) ** 2
        ).sum(axis=2)
    return out


def classify(partition, q):
    """Total classifier: the (zero-based) cell index of a single data point."""
    return int(partition.classify_many(np.atleast_2d(np.asarray(q, float)))[0])


@dataclass(frozen=True)
class BinnedSolution:
    """Output of the binning method.

    cell_weights w are mean-one over the p cells; sample_weights u are
    sum-one over the n parameter samples, constant within each cell.
    """

    partition: object
    cell_weights: WeightVector
    sample_weights: WeightVector
    assignments: np.ndarray
    counts: np.ndarray
    n_min: np.ndarray
    initial: SampleSet
    predicted: SampleSet
    box: BoxScaler
    qp_solution: object
    n_batches: int
    dropped_mass: float

    @property
    def p(self):
        return self.partition.p

    @property
    def n(self):
        return self.initial.n

    def initial_wedf(self):
        """The solution: the u-weighted EDF on the parameter samples."""
        return WeightedEdf(self.initial, self.sample_weights)

    def pushforward_samples(self):
        """u-weighted EDF over the predicted sample values."""
        return WeightedEdf(self.predicted, self.sample_weights)


def pushforward_binned(solution, partition=None):
    """Push-forward of the binned solution through the cell classifier.

    The w-weighted EDF over the representative points; identical by
    construction to aggregating the sample weights u over cells.
    """
    if partition is None:
        partition = solution.partition
    if partition is not solution.partition and not _same_partition(partition, solution.partition):
        raise ValueError("partition does not match the one used by the solution")
    return WeightedEdf(partition.reps, solution.cell_weights)


def _same_partition(a, b):
    return (
        a.kind == b.kind
        and a.p == b.p
        and np.array_equal(a.reps.points, b.reps.points)
    )


def distribute_cell_weights(w, assignments, p, weight_floor=DEFAULT_WEIGHT_FLOOR, strict=True):
    """Distribute cell weights w onto samples as u_i = w_k / (p n_k).

    Weights at or below ``weight_floor`` are zeroed and the rest renormalized
    to mean one first, so the returned u sums to one exactly (samples in
    floored cells get u_i = 0). In strict mode a kept cell with no samples
    raises UnreachableCellError; otherwise its mass is dropped and reported.

    Returns (u, w_floored, counts, dropped_mass).
    """
    w = np.asarray(w, dtype=float)
    assignments = np.asarray(assignments)
    if w.shape != (p,):
        raise ValueError(f"{w.shape[0] if w.ndim else 0} cell weights for p={p}")
    w_floored = np.where(w > weight_floor, w, 0.0)
    total = w_floored.sum()
    if total <= 0:
        raise ValueError("all cell weights are at or below the floor")
    w_floored = w_floored * (p / total)
    counts = np.bincount(assignments, minlength=p)
    kept = w_floored > 0
    empty_kept = kept & (counts == 0)
    dropped = 0.0
    if np.any(empty_kept):
        if strict:
            cells = np.nonzero(empty_kept)[0]
            raise UnreachableCellError(cells, w_floored[cells])
        dropped = float(np.sum(w_floored[empty_kept]) / p)
    per_cell = np.zeros(p)
    usable = kept & (counts > 0)
    per_cell[usable] = w_floored[usable] / (p * counts[usable])
    u = per_cell[assignments]
    return u, w_floored, counts, dropped


def proportional_min_fill(w, p, n_target, weight_floor=DEFAULT_WEIGHT_FLOOR):
    """n_min_k = ceil((n_target / p) w_k) for cells above the floor, else 0."""
    s = n_target / p
    w = np.asarray(w, dtype=float)
    return np.where(w > weight_floor, np.ceil(s * w), 0.0).astype(np.int64)


def at_least_one_min_fill(w, p, n_target, weight_floor=DEFAULT_WEIGHT_FLOOR):
    """n_min_k = 1 for cells above the floor, else 0."""
    return (np.asarray(w, dtype=float) > weight_floor).astype(np.int64)


_MIN_FILL_POLICIES = {
    "proportional": proportional_min_fill,
    "at_least_one": at_least_one_min_fill,
    "none": lambda w, p, n_target, weight_floor=0.0: np.zeros(len(w), dtype=np.int64),
}


def _resolve_partition(partition, predicted, box, seed):
    if isinstance(partition, (RegularGridPartition, KMeansPartition)):
        return partition
    kind, arg = partition
    if kind == "grid":
        return make_regular_grid(box, arg)
    if kind == "kmeans":
        return make_kmeans(predicted, int(arg), seed=seed)
    raise ValueError(f"unknown partition spec {partition!r}")


def solve_binning(
    qoi,
    initial_sampler,
    target,
    partition,
    n_target=None,
    seed=0,
    n_batch=None,
    min_fill="proportional",
    weight_floor=DEFAULT_WEIGHT_FLOOR,
    max_batches=DEFAULT_MAX_BATCHES,
    padding=PIPELINE_PADDING,
    data_box=None,
    solver_tol=1e-8,
    quad_points_per_dim=64,
    initial_samples=None,
    predicted_samples=None,
):
    """Run the full binning method.

    Parameters
    ----------
    qoi : callable
        Maps an (n, d_in) parameter array to (n,) or (n, d_out) data values.
        Ignored when precomputed samples are supplied.
    initial_sampler : object with .sample(n, rng) or callable (n, rng) -> points
        Draws initial parameter samples. Ignored for precomputed samples.
    target : target distribution (exact or empirical)
    partition : Partition, ("grid", cells_per_dim), or ("kmeans", p)
        Grid partitions cover the fitted data box by default.
    n_target : int
        Sample budget that sizes the per-cell minimum counts.
    seed : int
        Drives sampling and k-means; recorded in the result.
    n_batch : int, optional
        Batch size of the fill loop; defaults to n_target.
    min_fill : "proportional", "at_least_one", "none", or callable
        Policy mapping cell weights to minimum counts. "none" skips the fill
        loop (the weight distribution is still strict about reachable cells).
    data_box : BoxScaler, optional
        Known compact support of the predicted distribution; overrides the
        box fitted to the samples.
    initial_samples, predicted_samples : optional
        Precomputed aligned (parameter, data) samples; replaces the live
        model and disables the fill loop.

    Returns
    -------
    BinnedSolution

    Raises
    ------
    UnreachableCellError
        When a positive-weight cell cannot be filled within ``max_batches``
        (or has no samples at all in precomputed mode).
    """
    rng = np.random.default_rng(seed)
    precomputed = initial_samples is not None
    if precomputed:
        initial = initial_samples if isinstance(initial_samples, SampleSet) else SampleSet(initial_samples)
        if predicted_samples is None:
            predicted_pts = _eval_qoi(qoi, initial.points)
        else:
            predicted_pts = as_points(predicted_samples)
        if predicted_pts.shape[0] != initial.n:
            raise ValueError("initial and predicted sample counts differ")
        initial_pts = initial.points.copy()
        if n_target is None:
            n_target = initial.n
    else:
        if n_target is None or n_target < 1:
            raise ValueError(f"n_target must be positive, got {n_target}")
        initial_pts = _draw(initial_sampler, n_target, rng)
        predicted_pts = _eval_qoi(qoi, initial_pts)
    if n_batch is None:
        n_batch = max(int(n_target), 1)

    target = as_target(target)
    box = data_box if data_box is not None else fit_box(predicted_pts, padding=padding)
    part = _resolve_partition(partition, predicted_pts, box, seed)
    p = part.p

    reps_scaled = box.scale(part.reps.points)
    problem = assemble_qp(
        np.clip(reps_scaled, 0.0, 1.0), target, box=box,
        quad_points_per_dim=quad_points_per_dim,
    )
    qp_sol = solve_qp(problem, tol=solver_tol)
    w = qp_sol.w

    if callable(min_fill):
        n_min = np.asarray(min_fill(w, p, n_target), dtype=np.int64)
    else:
        n_min = _MIN_FILL_POLICIES[min_fill](w, p, n_target, weight_floor)

    assignments = part.classify_many(predicted_pts)
    counts = np.bincount(assignments, minlength=p)
    batches = 0
    if not precomputed:
        while np.any(counts < n_min):
            if batches >= max_batches:
                deficient = np.nonzero(counts < n_min)[0]
                raise UnreachableCellError(deficient, w[deficient])
            new_initial = _draw(initial_sampler, n_batch, rng)
            new_pred = _eval_qoi(qoi, new_initial)
            new_assign = part.classify_many(new_pred)
            initial_pts = np.vstack([initial_pts, new_initial])
            predicted_pts = np.vstack([predicted_pts, new_pred])
            assignments = np.concatenate([assignments, new_assign])
            counts = np.bincount(assignments, minlength=p)
            batches += 1

    u, w_floored, counts, dropped = distribute_cell_weights(
        w, assignments, p, weight_floor=weight_floor, strict=True
    )
    return BinnedSolution(
        partition=part,
        cell_weights=WeightVector(w_floored, Normalization.MEAN_ONE),
        sample_weights=WeightVector(u, Normalization.SUM_ONE),
        assignments=assignments,
        counts=counts,
        n_min=n_min,
        initial=SampleSet(initial_pts),
        predicted=SampleSet(predicted_pts),
        box=box,
        qp_solution=qp_sol,
        n_batches=batches,
        dropped_mass=dropped,
    )


@dataclass(frozen=True)
class NaiveSolution:
    """Output of the naive method: QP weights applied directly to the
    parameter samples."""

    weights: WeightVector
    initial: SampleSet
    predicted: SampleSet
    box: BoxScaler
    qp_solution: object

    def initial_wedf(self):
        return WeightedEdf(self.initial, self.weights)

    def pushforward(self):
        """The same weights on the predicted values (the data-space fit)."""
        return WeightedEdf(self.predicted, self.weights)


def solve_naive(
    qoi,
    initial_samples,
    target,
    padding=PIPELINE_PADDING,
    data_box=None,
    solver_tol=1e-8,
    quad_points_per_dim=64,
    predicted_samples=None,
):
    """Fit weights on the predicted samples and apply them to the parameters.

    Optimal in the data space by construction, but nothing controls the
    weight variability inside pre-image sets, so the weights fluctuate much
    more than the binning method's. ``data_box`` (a known compact support)
    overrides the box fitted to the samples.
    """
    initial = initial_samples if isinstance(initial_samples, SampleSet) else SampleSet(initial_samples)
    if predicted_samples is None:
        predicted_pts = _eval_qoi(qoi, initial.points)
    else:
        predicted_pts = as_points(predicted_samples)
    if predicted_pts.shape[0] != initial.n:
        raise ValueError("initial and predicted sample counts differ")
    target = as_target(target)
    box = data_box if data_box is not None else fit_box(predicted_pts, padding=padding)
    scaled = box.scale(predicted_pts)
    problem = assemble_qp(
        np.clip(scaled, 0.0, 1.0), target, box=box,
        quad_points_per_dim=quad_points_per_dim,
    )
    qp_sol = solve_qp(problem, tol=solver_tol)
    return NaiveSolution(
        weights=qp_sol.weights,
        initial=initial,
        predicted=SampleSet(predicted_pts),
        box=box,
        qp_solution=qp_sol,
    )


def _draw(sampler, n, rng):
    if hasattr(sampler, "sample"):
        out = sampler.sample(n, rng)
    else:
        out = sampler(n, rng)
    return as_points(out)


def _eval_qoi(qoi, pts):
    out = np.asarray(qoi(pts), dtype=float)
    if out.ndim == 1:
        out = out[:, None]
    if out.shape[0] != pts.shape[0]:
        raise ValueError(
            f"model returned {out.shape[0]} values for {pts.shape[0]} samples"
        )
    return out
