"""Dataset loading, synthesis, and splitting.

Datasets are immutable collections of sparse labeled samples. Labels are
stored as contiguous 0-based class ids; for libsvm files the original label
values are kept so files can be written back with their native labels.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import scipy.sparse


class DataError(ValueError):
    """Malformed input data (bad file format, invalid values)."""


@dataclasses.dataclass(frozen=True)
class Sample:
    """One sparse sample: parallel index/value arrays plus a class id.

    Indices are 0-based and strictly increasing; values are finite.
    """

    indices: np.ndarray
    values: np.ndarray
    label: int

    def nnz(self) -> int:
        return len(self.indices)


@dataclasses.dataclass(frozen=True)
class Dataset:
    """An immutable list of samples with known dimensionality and class count.

    ``label_values[c]`` is the original label (e.g. -1.0/+1.0 from a libsvm
    file) that was remapped to class id ``c``; ``None`` for generated data
    whose labels are already 0-based.
    """

    samples: tuple[Sample, ...]
    dim: int
    classes: int
    label_values: tuple[float, ...] | None = None

    def __len__(self) -> int:
        return len(self.samples)

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    def to_csr(self) -> scipy.sparse.csr_matrix:
        """Dense-dimensioned CSR view of the feature matrix."""
        indptr = np.zeros(len(self.samples) + 1, dtype=np.int64)
        for i, s in enumerate(self.samples):
            indptr[i + 1] = indptr[i] + len(s.indices)
        if indptr[-1] == 0:
            data = np.zeros(0)
            indices = np.zeros(0, dtype=np.int64)
        else:
            indices = np.concatenate([s.indices for s in self.samples])
            data = np.concatenate([s.values for s in self.samples])
        return scipy.sparse.csr_matrix(
            (data, indices, indptr), shape=(len(self.samples), self.dim)
        )


def make_sample(indices, values, label: int) -> Sample:
    """Build a validated Sample from index/value sequences."""
    idx = np.asarray(indices, dtype=np.int64)
    val = np.asarray(values, dtype=np.float64)
    if idx.shape != val.shape:
        raise DataError("indices and values must have equal length")
    if len(idx) > 1 and np.any(np.diff(idx) <= 0):
        raise DataError("sample indices must be strictly increasing")
    if len(idx) and idx[0] < 0:
        raise DataError("negative feature index")
    if not np.all(np.isfinite(val)):
        raise DataError("non-finite feature value")
    if label < 0:
        raise DataError("negative label")
    return Sample(idx, val, int(label))


def load_libsvm(path, min_dim: int = 0) -> Dataset:
    """Parse a libsvm text file (``<label> <idx>:<val> ...``, 1-based indices).

    Labels are remapped to contiguous 0-based ids in ascending order of the
    original values; the mapping is recorded on the returned Dataset. ``dim``
    is the largest index seen, or ``min_dim`` if that is larger (useful for
    sparse test sets whose top features never appear).
    """
    raw_labels: list[float] = []
    rows: list[tuple[np.ndarray, np.ndarray]] = []
    max_index = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            try:
                y = float(fields[0])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad label {fields[0]!r}") from None
            if not math.isfinite(y):
                raise DataError(f"{path}:{lineno}: non-finite label")
            idx = np.empty(len(fields) - 1, dtype=np.int64)
            val = np.empty(len(fields) - 1, dtype=np.float64)
            for k, tok in enumerate(fields[1:]):
                col, sep, v = tok.partition(":")
                if not sep:
                    raise DataError(f"{path}:{lineno}: expected idx:val, got {tok!r}")
                try:
                    idx[k] = int(col)
                    val[k] = float(v)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad pair {tok!r}") from None
            if len(idx):
                if idx.min() < 1:
                    raise DataError(f"{path}:{lineno}: indices are 1-based")
                order = np.argsort(idx, kind="stable")
                idx, val = idx[order] - 1, val[order]
                if len(idx) > 1 and np.any(np.diff(idx) == 0):
                    raise DataError(f"{path}:{lineno}: duplicate feature index")
                if not np.all(np.isfinite(val)):
                    raise DataError(f"{path}:{lineno}: non-finite feature value")
                max_index = max(max_index, int(idx[-1]) + 1)
            raw_labels.append(y)
            rows.append((idx, val))
    if not rows:
        raise DataError(f"{path}: empty file")
    values = sorted(set(raw_labels))
    if len(values) < 2:
        raise DataError(f"{path}: need at least 2 distinct labels, found {len(values)}")
    to_id = {v: c for c, v in enumerate(values)}
    samples = tuple(
        Sample(idx, val, to_id[y]) for (idx, val), y in zip(rows, raw_labels)
    )
    return Dataset(
        samples=samples,
        dim=max(max_index, min_dim),
        classes=len(values),
        label_values=tuple(values),
    )


def save_libsvm(ds: Dataset, path) -> None:
    """Write a Dataset in libsvm text format (1-based indices).

    Original label values are written when known, class ids otherwise.
    Values use shortest-roundtrip formatting so reloading is exact.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for s in ds.samples:
            if ds.label_values is not None:
                y = repr(float(ds.label_values[s.label]))
            else:
                y = str(s.label)
            pairs = " ".join(
                f"{int(i) + 1}:{float(v)!r}" for i, v in zip(s.indices, s.values)
            )
            fh.write(f"{y} {pairs}\n".rstrip() + "\n")


def _points_to_dataset(points: np.ndarray, labels: np.ndarray) -> Dataset:
    d = points.shape[1]
    idx = np.arange(d, dtype=np.int64)
    samples = tuple(
        Sample(idx, np.asarray(row, dtype=np.float64), int(y))
        for row, y in zip(points, labels)
    )
    return Dataset(samples=samples, dim=d, classes=int(labels.max()) + 1)


def gen_circles(n: int, noise: float = 0.05, seed: int = 0) -> Dataset:
    """Two concentric circles: n/2 points at radius 1.0 (class 0) and n/2 at
    radius 0.5 (class 1), with isotropic Gaussian noise."""
    if n < 2 or n % 2:
        raise ValueError("n must be even and >= 2")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    half = n // 2
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    radius = np.concatenate([np.full(half, 1.0), np.full(half, 0.5)])
    points = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    if noise > 0:
        points += rng.normal(0.0, noise, size=points.shape)
    labels = np.concatenate([np.zeros(half, dtype=int), np.ones(half, dtype=int)])
    return _points_to_dataset(points, labels)


def gen_moons(n: int, noise: float = 0.05, seed: int = 0) -> Dataset:
    """Two interleaving half-circles: the upper arc (class 0) and a lower arc
    shifted right and down (class 1), with isotropic Gaussian noise."""
    if n < 2 or n % 2:
        raise ValueError("n must be even and >= 2")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    half = n // 2
    t0 = rng.uniform(0.0, np.pi, size=half)
    t1 = rng.uniform(0.0, np.pi, size=half)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    points = np.vstack([upper, lower])
    if noise > 0:
        points += rng.normal(0.0, noise, size=points.shape)
    labels = np.concatenate([np.zeros(half, dtype=int), np.ones(half, dtype=int)])
    return _points_to_dataset(points, labels)


def split(ds: Dataset, train_frac: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Disjoint random partition with ceil(train_frac * n) training samples."""
    if not len(ds):
        raise DataError("cannot split an empty dataset")
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must be in (0, 1)")
    n_train = math.ceil(train_frac * len(ds))
    perm = np.random.default_rng(seed).permutation(len(ds))
    take = lambda ix: Dataset(
        samples=tuple(ds.samples[i] for i in ix),
        dim=ds.dim,
        classes=ds.classes,
        label_values=ds.label_values,
    )
    return take(perm[:n_train]), take(perm[n_train:])
