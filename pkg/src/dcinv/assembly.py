"""Assembly of the weighted-EDF fitting quadratic program.

On samples scaled to the unit hypercube, the squared L2 misfit between the
weighted EDF and a target distribution function expands into a quadratic in
the weights with

    H_ij = (1/l^2) prod_k (1 - max(q_k^i, q_k^j)),
    b_i  = (1/l)   int over [q^i, 1] of F_targ(q) dq,

so that (1/2) w^T H w - b^T w equals half the squared misfit up to a constant
independent of w. H and the sample-target b are exact closed forms; only
exact-CDF targets without a closed-form running integral need quadrature.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from . import targets as _targets
from .core import as_points

COORD_TOL = 1e-12
JITTER = 1e-10
DEFAULT_QUAD_POINTS = 64

_B_CHUNK = 2_000_000  # elements per (l x m-chunk) block in empirical assembly


@dataclass(frozen=True)
class QpProblem:
    """Matrix and vector of the fitting QP, plus the simplex constraints.

    The feasible set is {w >= 0, (1/l) sum w_i = 1}; the objective is
    (1/2) w^T h w - b^T w.
    """

    h: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError(f"h must be square, got shape {h.shape}")
        if b.shape != (h.shape[0],):
            raise ValueError(f"b has shape {b.shape}, expected ({h.shape[0]},)")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(b))):
            raise ValueError("h and b must be finite")
        if np.max(np.abs(h - h.T)) > COORD_TOL:
            raise ValueError("h must be symmetric within 1e-12")
        h = 0.5 * (h + h.T)
        h.flags.writeable = False
        b = b.copy()
        b.flags.writeable = False
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "b", b)

    @property
    def size(self):
        return self.b.size

    def objective(self, w):
        w = np.asarray(w, dtype=float)
        return float(0.5 * w @ self.h @ w - self.b @ w)

    def gradient(self, w):
        return self.h @ np.asarray(w, dtype=float) - self.b


def _check_unit_box(pts, what="samples"):
    if pts.size and (pts.min() < -COORD_TOL or pts.max() > 1.0 + COORD_TOL):
        raise ValueError(
            f"{what} must lie in the unit box; range "
            f"[{pts.min()}, {pts.max()}]"
        )
    return np.clip(pts, 0.0, 1.0)


def dedupe_jitter(points, rng_seed=0):
    """Perturb duplicated rows by ~1e-10 toward the box interior.

    Duplicate samples make the fitting matrix singular; the jitter restores
    strict positive-definiteness while moving each point by at most 1e-10
    per coordinate. First occurrences are left untouched. A warning reports
    how many rows were perturbed.
    """
    pts = as_points(points)
    order = np.lexsort(pts.T[::-1])
    dup_rows = sorted(
        {max(a, b) for a, b in zip(order[:-1], order[1:]) if np.array_equal(pts[a], pts[b])}
    )
    if not dup_rows:
        return pts
    warnings.warn(
        f"{len(dup_rows)} duplicated sample row(s) jittered by {JITTER} to keep "
        "the fitting matrix positive definite",
        stacklevel=2,
    )
    rng = np.random.default_rng(rng_seed)
    out = pts.copy()
    for i in dup_rows:
        step = rng.uniform(0.5 * JITTER, JITTER, size=pts.shape[1])
        direction = np.where(out[i] > 0.5, -1.0, 1.0)
        out[i] = out[i] + direction * step
    return out


def assemble_h(samples):
    """Closed-form fitting matrix on unit-box samples.

    H_ij = (1/l^2) prod_k (1 - max(q_k^i, q_k^j)); exactly symmetric by
    construction. Raises if any coordinate is outside [0, 1] beyond 1e-12.
    """
    pts = _check_unit_box(as_points(samples))
    ell = pts.shape[0]
    if ell == 0:
        raise ValueError("cannot assemble an empty problem")
    h = np.ones((ell, ell))
    for k in range(pts.shape[1]):
        col = pts[:, k]
        h *= 1.0 - np.maximum(col[:, None], col[None, :])
    h /= ell * ell
    return h


def assemble_b_empirical(samples, target_samples):
    """Closed-form b for a sample-based (EDF) target.

    b_i = (1/(l m)) sum_j prod_k max(0, 1 - max(q_k^i, y_k^j)). This is the
    exact integral of the target EDF over [q^i, 1]: target samples above the
    unit box contribute nothing and samples below it contribute their full
    column, which the clipped factor reproduces exactly.
    """
    q = _check_unit_box(as_points(samples))
    y = as_points(target_samples)
    if y.shape[0] == 0:
        raise ValueError("empirical target needs at least one sample")
    if q.shape[1] != y.shape[1]:
        raise ValueError(
            f"dimension mismatch: samples have dim {q.shape[1]}, "
            f"target has dim {y.shape[1]}"
        )
    ell, d = q.shape
    m = y.shape[0]
    b = np.zeros(ell)
    chunk = max(1, _B_CHUNK // max(ell, 1))
    for start in range(0, m, chunk):
        yc = y[start : start + chunk]
        f = 1.0 - np.maximum(q[:, None, 0], yc[None, :, 0])
        np.clip(f, 0.0, None, out=f)
        for k in range(1, d):
            fk = 1.0 - np.maximum(q[:, None, k], yc[None, :, k])
            np.clip(fk, 0.0, None, out=fk)
            f *= fk
        b += f.sum(axis=1)
    return b / (ell * m)


def assemble_b_exact(samples, cdf, quad_points_per_dim=DEFAULT_QUAD_POINTS, integral_of_cdf=None):
    """b for an exact-CDF target.

    Parameters
    ----------
    samples : array-like, shape (l, d)
        Unit-box sample points.
    cdf : callable
        Maps an (m, d) array of unit-box points to CDF values.
    quad_points_per_dim : int
        Gauss-Legendre nodes per dimension for the tensor-product quadrature
        over [q^i, 1].
    integral_of_cdf : callable, optional
        For d = 1 only: running integral I(t) = int^t cdf, in which case
        b_i = (1/l) (I(1) - I(q_i)) exactly and no quadrature is used.
    """
    pts = _check_unit_box(as_points(samples))
    ell, d = pts.shape
    if ell == 0:
        raise ValueError("cannot assemble an empty problem")
    if d == 1 and integral_of_cdf is not None:
        upper = np.asarray(integral_of_cdf(np.ones(1)))[0]
        b = (upper - np.asarray(integral_of_cdf(pts[:, 0]))) / ell
        return np.maximum(b, 0.0)
    if quad_points_per_dim < 2:
        raise ValueError(
            f"quad_points_per_dim must be >= 2, got {quad_points_per_dim}"
        )
    nodes, weights = roots_legendre(quad_points_per_dim)
    nodes = 0.5 * (nodes + 1.0)  # map to [0, 1]
    weights = 0.5 * weights
    b = np.empty(ell)
    if d == 1:
        q = pts[:, 0]
        width = 1.0 - q
        t = q[:, None] + width[:, None] * nodes[None, :]
        vals = np.asarray(cdf(t.reshape(-1, 1))).reshape(ell, -1)
        b = width * (vals @ weights)
        return b / ell
    for i in range(ell):
        axes = [pts[i, k] + (1.0 - pts[i, k]) * nodes for k in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([m.ravel() for m in mesh], axis=1)
        vals = np.asarray(cdf(grid)).reshape([quad_points_per_dim] * d)
        wprod = np.ones([1] * d)
        for k in range(d):
            shape = [1] * d
            shape[k] = quad_points_per_dim
            wprod = wprod * weights.reshape(shape)
        b[i] = np.prod(1.0 - pts[i]) * float(np.sum(vals * wprod))
    return b / ell


def scaled_cdf(target, box):
    """Adapt a target defined on the data space to unit-box coordinates.

    Returns (cdf, integral_of_cdf) callables over scaled coordinates;
    integral_of_cdf is None when the target has no closed form (or d > 1).
    """

    def cdf(points_scaled):
        pts = as_points(points_scaled)
        return np.asarray(target.cdf(box.unscale(pts)))

    integral = None
    if box.dim == 1 and getattr(target, "integral_of_cdf", None) is not None:
        width = float(box.width[0])
        lo = float(box.lower[0])

        def integral(t):
            t = np.asarray(t, dtype=float)
            return (np.asarray(target.integral_of_cdf(lo + t * width))) / width

    return cdf, integral


def assemble_qp(scaled_samples, target, box=None, quad_points_per_dim=DEFAULT_QUAD_POINTS):
    """Build the full QpProblem for unit-box samples against a target.

    Duplicated samples are jittered once so the matrix and vector stay
    consistent. Empirical targets use the closed-form assembly (target
    samples are scaled through ``box`` first when one is given); exact
    targets are adapted to scaled coordinates via ``box``.
    """
    pts = dedupe_jitter(_check_unit_box(as_points(scaled_samples)))
    target = _targets.as_target(target)
    target_dim = getattr(target, "dim", None)
    if target_dim is not None and target_dim != pts.shape[1]:
        raise ValueError(
            f"target has dim {target_dim}, samples have dim {pts.shape[1]}"
        )
    if isinstance(target, _targets.EmpiricalTarget):
        y = target.samples.points
        if box is not None:
            y = box.scale(y)
        b = assemble_b_empirical(pts, y)
    else:
        if box is None:
            cdf, integral = (lambda p: np.asarray(target.cdf(p))), getattr(
                target, "integral_of_cdf", None
            )
            if pts.shape[1] == 1 and integral is not None:
                b = assemble_b_exact(pts, cdf, quad_points_per_dim, integral_of_cdf=integral)
            else:
                b = assemble_b_exact(pts, cdf, quad_points_per_dim)
        else:
            cdf, integral = scaled_cdf(target, box)
            b = assemble_b_exact(pts, cdf, quad_points_per_dim, integral_of_cdf=integral)
    return QpProblem(assemble_h(pts), b)
