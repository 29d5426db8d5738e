"""CSV sample files.

Format: first row is a header ``x1,...,xd`` (any prefix is accepted when
reading), one sample per row, decimal floats, no missing values. Floats are
written with 17 significant digits so a save/load round trip is bit-exact.
"""

import csv

from .core import SampleSet, as_points


def save_samples(path, samples, prefix="x"):
    """Write a sample set to CSV with header ``<prefix>1..<prefix>d``."""
    pts = as_points(samples)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([f"{prefix}{k + 1}" for k in range(pts.shape[1])])
        for row in pts:
            writer.writerow([f"{v:.17g}" for v in row])


def load_samples(path):
    """Read a sample set from CSV; dimension comes from the header."""
    rows = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        dim = len(header)
        if dim == 0:
            raise ValueError(f"{path}: empty header row")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim:
                raise ValueError(
                    f"{path}:{lineno}: expected {dim} columns, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ValueError(f"{path}: no samples")
    return SampleSet(rows)


def load_pairs(param_csv, data_csv):
    """Read row-aligned (parameter, data) sample files.

    Row i of the parameter file and row i of the data file describe the same
    model evaluation. Both files must have the same number of rows.
    """
    params = load_samples(param_csv)
    data = load_samples(data_csv)
    if params.n != data.n:
        raise ValueError(
            f"row-count mismatch: {param_csv} has {params.n} rows, "
            f"{data_csv} has {data.n}"
        )
    return params, data
