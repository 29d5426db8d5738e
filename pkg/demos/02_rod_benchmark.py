"""The heated-rod benchmark end to end: naive, binning, and density methods.

The model maps rod length and thermal diffusivity, lambda = (ell, kappa), to
one sensor temperature. An observed temperature distribution is given; the
task is a distribution over (ell, kappa) whose push-forward matches it.

Output: the predictability diagnostic for a healthy and a violating target,
then a comparison table of push-forward accuracy and weight variability for
every method on shared samples. The binning weights are far less variable
than the naive ones because samples in the same data-space cell share a
weight, which preserves the assumed conditional structure along the map's
contours.
"""

import numpy as np

from dcinv import (
    HeatRod,
    SampleSet,
    UniformBoxSampler,
    compare_methods,
    heat_rod_observed,
    heat_rod_violation_observed,
    solve_density,
)

model = HeatRod()
sampler = UniformBoxSampler(model.box)
n, m, seed = 2000, 10_000, 42

rng = np.random.default_rng(seed)
initial = sampler.sample(n, rng)
predicted = SampleSet(model.qoi(initial.points)[:, None])
print(f"predicted range: [{predicted.points.min():.3f}, {predicted.points.max():.3f}]")

# --- predictability diagnostic ----------------------------------------------

for label, target in (
    ("healthy", heat_rod_observed()),
    ("violating", heat_rod_violation_observed()),
):
    observed = target.sample(m, np.random.default_rng(seed + 1))
    sol = solve_density(initial, predicted, observed)
    print(f"{label} observed N({target.mu}, {target.sigma}): "
          f"diagnostic = {sol.diagnostic:.4f} "
          f"({'ok' if 0.9 <= sol.diagnostic <= 1.1 else 'mass outside predicted support'})")

# --- method comparison on shared samples ------------------------------------

rows = compare_methods(model, heat_rod_observed(), n=500, m=m, p=30, seed=seed)
print()
print(f"{'method':<15} {'L2':>9} {'sup':>9} {'weight var':>11}")
for row in rows:
    print(f"{row['method']:<15} {row['l2']:>9.5f} {row['sup']:>9.5f} "
          f"{row['weight_variance']:>11.4f}")

naive = next(r for r in rows if r["method"] == "naive")
binned = next(r for r in rows if r["method"] == "binning-grid")
print()
print(f"naive weight variance / binning weight variance: "
      f"{naive['weight_variance'] / binned['weight_variance']:.1f}x")
print("(the naive fit is the L2 optimum in the data space, but its weights")
print(" fluctuate freely along contours; binning trades a little data-space")
print(" accuracy for stable, contour-respecting parameter weights)")
