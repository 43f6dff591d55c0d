"""Datasets: CSV ingestion, standardization, shifts, and a synthetic generator.

A dataset is an immutable bundle of an ``(n, d)`` feature matrix, binary
labels, feature names, and an optional per-row meta column (e.g. a year)
used for temporal splitting. Shift generators are pure functions of
their seed. Noise is applied in standardized feature space: standardize
first, then shift, so noise scales in the 0-0.1 range act on unit-scale
features.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import CsvParseError, DomainError, SchemaError, ShapeError
from .rng import make_rng


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable n x d feature matrix with binary labels."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    meta: np.ndarray | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise ShapeError(f"features must be a non-empty 2-D matrix, got shape {feats.shape}")
        if not np.isfinite(feats).all():
            raise DomainError("features contain non-finite entries")
        if labels.shape != (feats.shape[0],):
            raise ShapeError(f"labels shape {labels.shape} does not match {feats.shape[0]} rows")
        if not np.isin(labels, (0, 1)).all():
            raise DomainError("labels must be binary 0/1")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != feats.shape[1]:
            raise ShapeError(f"{len(names)} feature names for {feats.shape[1]} columns")
        meta = self.meta
        if meta is not None:
            meta = np.asarray(meta, dtype=np.float64)
            if meta.shape != (feats.shape[0],):
                raise ShapeError(f"meta shape {meta.shape} does not match {feats.shape[0]} rows")
            meta = _freeze(meta)
        object.__setattr__(self, "features", _freeze(feats))
        object.__setattr__(self, "labels", _freeze(labels.astype(np.int64)))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "meta", meta)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(features, self.labels, self.feature_names, self.meta)

    def take(self, idx: np.ndarray) -> "Dataset":
        meta = self.meta[idx] if self.meta is not None else None
        return Dataset(self.features[idx], self.labels[idx], self.feature_names, meta)


def load_csv(path, label_column: str, meta_column: str | None = None) -> Dataset:
    """Load an RFC-4180 CSV with a header row.

    Every non-label, non-meta column is parsed as a float feature. The
    label column must hold 0/1 values (0.0/1.0 accepted).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        rows = list(reader)
    if label_column not in header:
        raise SchemaError(f"{path}: label column {label_column!r} not found in header")
    if meta_column is not None and meta_column not in header:
        raise SchemaError(f"{path}: meta column {meta_column!r} not found in header")
    label_idx = header.index(label_column)
    meta_idx = header.index(meta_column) if meta_column is not None else None
    feat_idx = [i for i in range(len(header)) if i not in (label_idx, meta_idx)]
    feature_names = tuple(header[i] for i in feat_idx)

    n = len(rows)
    if n == 0:
        raise DomainError(f"{path}: no data rows")
    feats = np.empty((n, len(feat_idx)))
    labels = np.empty(n, dtype=np.int64)
    meta = np.empty(n) if meta_idx is not None else None
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise CsvParseError(f"{path}: row {r + 1} has {len(row)} cells, expected {len(header)}")

        def cell(i: int) -> float:
            try:
                return float(row[i])
            except ValueError:
                raise CsvParseError(
                    f"{path}: row {r + 1}, column {header[i]!r}: cannot parse {row[i]!r}"
                ) from None

        for j, i in enumerate(feat_idx):
            feats[r, j] = cell(i)
        lab = cell(label_idx)
        if lab not in (0.0, 1.0):
            raise DomainError(f"{path}: row {r + 1}: label must be 0 or 1, got {row[label_idx]!r}")
        labels[r] = int(lab)
        if meta is not None:
            meta[r] = cell(meta_idx)
    return Dataset(feats, labels, feature_names, meta)


def save_csv(ds: Dataset, path, label_column: str = "label", meta_column: str = "meta") -> None:
    """Write a dataset as CSV at 17 significant digits (lossless round trip)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = list(ds.feature_names) + [label_column]
        if ds.meta is not None:
            header.append(meta_column)
        writer.writerow(header)
        for r in range(ds.n):
            row = [f"{v:.17g}" for v in ds.features[r]] + [str(int(ds.labels[r]))]
            if ds.meta is not None:
                row.append(f"{ds.meta[r]:.17g}")
            writer.writerow(row)


@dataclass(frozen=True)
class Standardizer:
    """Per-feature centering and scaling learned from a training set.

    Scales are population standard deviations; constant columns get
    scale 1 so transforming them is a pure centering, never a division
    by zero.
    """

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, ds: Dataset) -> Dataset:
        return ds.with_features((ds.features - self.mean) / self.scale)

    def invert(self, ds: Dataset) -> Dataset:
        return ds.with_features(ds.features * self.scale + self.mean)


def fit_standardizer(train: Dataset) -> Standardizer:
    mean = train.features.mean(axis=0)
    scale = train.features.std(axis=0)  # population std (ddof=0)
    scale = np.where(scale > 0.0, scale, 1.0)
    return Standardizer(_freeze(mean), _freeze(scale))


def gaussian_shift(ds: Dataset, sigma: float, seed: int) -> Dataset:
    """Add i.i.d. N(0, sigma^2) noise to every feature entry; labels and meta untouched."""
    if sigma < 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return ds
    noise = make_rng(seed).normal(0.0, sigma, size=ds.features.shape)
    return ds.with_features(ds.features + noise)


def temporal_split(ds: Dataset, threshold: float) -> tuple[Dataset, Dataset]:
    """Split on the meta column: original = rows with meta < threshold, shifted = all rows."""
    if ds.meta is None:
        raise SchemaError("temporal split needs a meta column")
    mask = ds.meta < threshold
    if not mask.any():
        raise DomainError(f"no rows with meta < {threshold}; original split would be empty")
    return ds.take(np.flatnonzero(mask)), ds


def synth_two_gaussians(
    n: int, d: int, separation: float = 2.0, label_balance: float = 0.5, seed: int = 0
) -> Dataset:
    """Two spherical Gaussian classes with means +-separation/sqrt(d) * ones.

    The distance between class means is 2*separation regardless of d, so
    the Bayes error is Phi(-separation). Serves as the desk-scale stand-in
    for real tabular data in tests and experiments.
    """
    if n < 2 or d < 1:
        raise DomainError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    if not 0 < label_balance < 1:
        raise DomainError(f"label_balance must be in (0, 1), got {label_balance}")
    rng = make_rng(seed)
    n_pos = int(round(n * label_balance))
    labels = np.concatenate([np.ones(n_pos, dtype=np.int64), np.zeros(n - n_pos, dtype=np.int64)])
    labels = labels[rng.permutation(n)]
    mu = separation / np.sqrt(d)
    feats = rng.normal(size=(n, d)) + np.where(labels[:, None] == 1, mu, -mu)
    names = tuple(f"f{i}" for i in range(d))
    return Dataset(feats, labels, names)


def split_rows(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded row split into (train, test)."""
    if not 0 < test_fraction < 1:
        raise DomainError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n_test = int(round(ds.n * test_fraction))
    if n_test == 0 or n_test == ds.n:
        raise DomainError(f"test_fraction {test_fraction} leaves an empty split for n={ds.n}")
    perm = make_rng(seed).permutation(ds.n)
    return ds.take(perm[n_test:]), ds.take(perm[:n_test])
