"""One-hot binning of real features.

Every original feature is cut into ``bins`` intervals; a sample maps to one
active indicator per feature, giving an encoded vector of width dim * bins
with exactly ``dim`` ones. Intervals are half-open (ties go to the higher
bin) and out-of-range values clamp to the edge bins, so the encoded
nnz-equals-dim identity holds for any input.
"""

from __future__ import annotations

import dataclasses
from typing import NamedTuple

import numpy as np

from .datasets import DataError, Dataset, Sample

STRATEGIES = ("equal", "quantile")


@dataclasses.dataclass(frozen=True)
class BinningSpec:
    """Per-feature cut points defining the one-hot map.

    ``boundaries`` has shape (dim, bins - 1) with nondecreasing rows. A value
    v on feature j falls in bin ``searchsorted(boundaries[j], v, 'right')``,
    i.e. its bin index counts the cut points <= v.
    """

    dim: int
    bins: int
    boundaries: np.ndarray
    strategy: str

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.boundaries.shape != (self.dim, self.bins - 1):
            raise ValueError("boundaries must have shape (dim, bins - 1)")

    @property
    def encoded_dim(self) -> int:
        return self.dim * self.bins

    def bin_index(self, feature: int, value: float) -> int:
        if not np.isfinite(value):
            raise DataError("non-finite feature value")
        return int(np.searchsorted(self.boundaries[feature], value, side="right"))

    def zero_bins(self) -> np.ndarray:
        """Bin of the implicit value 0.0 for each feature (sparse samples)."""
        cuts = self.boundaries
        return (cuts < 0.0).sum(axis=1) + (cuts == 0.0).sum(axis=1)


class EncodedSample(NamedTuple):
    """Active encoded indices (one per feature block) plus the class id."""

    active: np.ndarray
    label: int


@dataclasses.dataclass(frozen=True)
class EncodedDataset:
    """Column of one-hot encoded samples as an (n, dim) matrix of active
    indices, with all implicit values equal to 1."""

    active: np.ndarray
    labels: np.ndarray
    dim: int
    bins: int
    classes: int

    @property
    def encoded_dim(self) -> int:
        return self.dim * self.bins

    def __len__(self) -> int:
        return len(self.labels)

    def sample(self, i: int) -> EncodedSample:
        return EncodedSample(self.active[i], int(self.labels[i]))


def fit_bins(ds: Dataset, bins: int, strategy: str = "quantile") -> BinningSpec:
    """Fit per-feature cut points on a dataset.

    equal: cuts evenly spaced over [min, max] of each feature.
    quantile: cuts at the h/bins empirical quantiles.

    Sparse samples are interpreted densely (absent features contribute 0).
    Constant features yield bins-1 identical cuts, mapping everything to one
    bin.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    if not len(ds):
        raise DataError("cannot fit bins on an empty dataset")
    csc = ds.to_csr().tocsc()
    fractions = np.arange(1, bins) / bins
    boundaries = np.empty((ds.dim, bins - 1))
    for j in range(ds.dim):
        col = np.asarray(csc[:, [j]].todense()).ravel()
        if strategy == "equal":
            lo, hi = col.min(), col.max()
            boundaries[j] = lo + (hi - lo) * fractions
        else:
            boundaries[j] = np.quantile(col, fractions)
    return BinningSpec(dim=ds.dim, bins=bins, boundaries=boundaries, strategy=strategy)


def encode(spec: BinningSpec, s: Sample) -> EncodedSample:
    """Map a sparse sample to its active encoded indices (one per feature)."""
    if len(s.indices) and s.indices[-1] >= spec.dim:
        raise DataError(
            f"feature index {int(s.indices[-1])} out of range for dim={spec.dim}"
        )
    bins = spec.zero_bins().copy()
    for j, v in zip(s.indices, s.values):
        bins[j] = spec.bin_index(int(j), float(v))
    active = np.arange(spec.dim, dtype=np.int64) * spec.bins + bins
    return EncodedSample(active=active, label=s.label)


def encode_dataset(spec: BinningSpec, ds: Dataset) -> EncodedDataset:
    """Encode every sample; the result is a dense (n, dim) index matrix."""
    n = len(ds)
    active = np.empty((n, spec.dim), dtype=np.int64)
    for i, s in enumerate(ds.samples):
        active[i] = encode(spec, s).active
    return EncodedDataset(
        active=active,
        labels=ds.labels(),
        dim=spec.dim,
        bins=spec.bins,
        classes=ds.classes,
    )


def sparsity_report(spec: BinningSpec, ds: Dataset) -> np.ndarray:
    """Fraction of samples activating each encoded index (length dim * bins).

    The per-sample active count is always dim, so the mean rate is 1/bins.
    """
    if not len(ds):
        raise DataError("cannot compute sparsity of an empty dataset")
    enc = encode_dataset(spec, ds)
    counts = np.bincount(enc.active.ravel(), minlength=spec.encoded_dim)
    return counts / len(ds)
