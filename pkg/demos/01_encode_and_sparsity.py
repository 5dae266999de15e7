"""One-hot subspace encoding: how real features become sparse indicator bins.

Every feature is cut into `bins` intervals; a sample activates exactly one
indicator per feature, so a d-dimensional point becomes d ones in a vector of
width d * bins. This script fits both binning strategies on synthetic data
and prints the per-bin activation rates (rare bins are why the trainer uses
per-coordinate step sizes).
"""

import numpy as np

from binfm import encode, fit_bins, gen_circles, sparsity_report

ds = gen_circles(n=2000, noise=0.05, seed=0)
print(f"circles: {len(ds)} samples, {ds.dim} features, {ds.classes} classes")

bins = 12
for strategy in ("equal", "quantile"):
    spec = fit_bins(ds, bins, strategy=strategy)
    print(f"\n=== {strategy} binning, {bins} bins per feature ===")
    print(f"encoded width: {spec.encoded_dim} (= dim * bins)")
    print(f"feature-0 cut points: {np.round(spec.boundaries[0], 3)}")

    sample = ds.samples[0]
    enc = encode(spec, sample)
    print(f"sample {np.round(sample.values, 3)} -> active indices {enc.active.tolist()}")
    assert len(enc.active) == ds.dim  # one-hot: nnz is always dim

    rates = sparsity_report(spec, ds)
    print(f"activation rates: mean={rates.mean():.4f} (= 1/bins = {1 / bins:.4f})")
    print(f"                  min={rates.min():.4f}  max={rates.max():.4f}")
    bars = (rates[:bins] * 200).astype(int)
    print("feature-0 rate profile (one row per bin):")
    for h, bar in enumerate(bars):
        print(f"  bin {h:2d} {'#' * bar}")

print(
    "\nEqual-width bins concentrate mass near the ring radii while quantile "
    "bins flatten the profile; both keep exactly one active bin per feature."
)
