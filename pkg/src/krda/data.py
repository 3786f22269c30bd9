"""Datasets, synthetic generators, CSV I/O, standardization and subsampling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, NonFiniteValue, ParseError

LABEL_COLUMN = "label"
STD_FLOOR = 1e-12

# Arc centers of the canonical two-moons construction and their midpoint,
# which is also the centroid of the two noiseless arcs.
UPPER_CENTER = np.array([0.0, 0.0])
LOWER_CENTER = np.array([1.0, 0.5])
MOONS_CENTROID = 0.5 * (UPPER_CENTER + LOWER_CENTER)


@dataclass
class Dataset:
    features: np.ndarray
    labels: Optional[np.ndarray] = None
    column_names: list = field(default_factory=list)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if x.size else x.reshape(0, len(self.column_names) or 0)
        if x.ndim != 2:
            raise DimensionMismatch(f"features must be a matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NonFiniteValue("features contain non-finite values")
        self.features = x
        if not self.column_names:
            self.column_names = [f"x{j}" for j in range(x.shape[1])]
        if len(self.column_names) != x.shape[1]:
            raise DimensionMismatch(f"{len(self.column_names)} column names for {x.shape[1]} columns")
        if self.labels is not None:
            y = np.asarray(self.labels).astype(int)
            if y.shape != (x.shape[0],):
                raise DimensionMismatch(f"labels have shape {y.shape}, expected ({x.shape[0]},)")
            self.labels = y

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        labels = None if self.labels is None else self.labels[rows]
        return Dataset(self.features[rows], labels, list(self.column_names))

    def with_features(self, features) -> "Dataset":
        return Dataset(features, None if self.labels is None else self.labels.copy(), list(self.column_names))


@dataclass(frozen=True)
class MoonsSpec:
    n: int
    noise_std: float = 0.1
    rotation_deg: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 0 or self.noise_std < 0:
            raise ValueError("n and noise_std must be nonnegative")


@dataclass(frozen=True)
class GmmSpec:
    """``modes`` holds ``(weight, mean vector, diagonal covariance)`` triples."""

    modes: tuple
    n: int
    seed: int = 0

    def __post_init__(self):
        weights = np.array([m[0] for m in self.modes], dtype=float)
        if weights.size == 0 or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("mode weights must be nonnegative and sum to 1")
        for _, mean, cov in self.modes:
            if np.any(np.asarray(cov, dtype=float) <= 0):
                raise ValueError("covariance entries must be positive")
            if np.shape(mean) != np.shape(cov):
                raise ValueError("mean and covariance diagonal lengths differ")


def rotate(points, angle_deg, center=MOONS_CENTROID):
    theta = math.radians(angle_deg)
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return (np.asarray(points, dtype=float) - center) @ rot.T + center


def gen_moons(spec: MoonsSpec) -> Dataset:
    """Two interleaved half circles, label 0 on top, optionally rotated.

    Noise and arc positions are drawn before rotation, so the same seed gives
    the same cloud at every angle, rotated about the arcs' centroid.
    """
    rng = np.random.default_rng(spec.seed)
    n0 = spec.n // 2
    n1 = spec.n - n0
    t = rng.uniform(0.0, math.pi, size=spec.n)
    upper = np.column_stack([np.cos(t[:n0]), np.sin(t[:n0])]) + UPPER_CENTER
    lower = np.column_stack([-np.cos(t[n0:]), -np.sin(t[n0:])]) + LOWER_CENTER
    x = np.vstack([upper, lower]).reshape(spec.n, 2)
    x = x + spec.noise_std * rng.standard_normal(x.shape)
    if spec.rotation_deg % 360.0 != 0.0:
        x = rotate(x, spec.rotation_deg)
    y = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    order = rng.permutation(spec.n)
    return Dataset(x[order], y[order], ["x0", "x1"])


def gen_gmm(spec: GmmSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    weights = np.array([m[0] for m in spec.modes], dtype=float)
    means = np.array([np.atleast_1d(m[1]) for m in spec.modes], dtype=float)
    stds = np.sqrt(np.array([np.atleast_1d(m[2]) for m in spec.modes], dtype=float))
    k = rng.choice(len(weights), size=spec.n, p=weights / weights.sum())
    x = means[k] + stds[k] * rng.standard_normal((spec.n, means.shape[1]))
    return Dataset(x, None, [f"x{j}" for j in range(means.shape[1])])


def load_csv(path) -> Dataset:
    """Read a headed CSV; a column named ``label`` becomes the label vector."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file, expected a header", row=1) from None
        label_idx = header.index(LABEL_COLUMN) if LABEL_COLUMN in header else None
        names = [h for j, h in enumerate(header) if j != label_idx]
        rows, labels = [], []
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise ParseError(f"{path}: expected {len(header)} fields, got {len(record)}", row=lineno)
            values = []
            for j, cell in enumerate(record):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"{path}: not a number: {cell!r}", row=lineno, column=header[j]) from None
                if not math.isfinite(v):
                    raise NonFiniteValue(f"{path}: non-finite value {cell!r}", row=lineno, column=header[j])
                if j == label_idx:
                    if v not in (0.0, 1.0):
                        raise ParseError(f"{path}: label must be 0 or 1, got {cell!r}", row=lineno, column=header[j])
                    labels.append(int(v))
                else:
                    values.append(v)
            rows.append(values)
    features = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return Dataset(features, np.array(labels, dtype=int) if label_idx is not None else None, names)


def save_csv(dataset: Dataset, path) -> None:
    """Write features with shortest round-trip float repr, labels last."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = list(dataset.column_names)
        if dataset.labels is not None:
            header.append(LABEL_COLUMN)
        writer.writerow(header)
        for i, row in enumerate(dataset.features):
            cells = [repr(float(v)) for v in row]
            if dataset.labels is not None:
                cells.append(str(int(dataset.labels[i])))
            writer.writerow(cells)


def subsample(dataset: Dataset, fraction: float, seed) -> Dataset:
    """Uniform draw of ``floor(fraction * n)`` rows, kept in original order."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    k = int(math.floor(fraction * dataset.n))
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(dataset.n, size=k, replace=False))
    return dataset.take(rows)


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, *blocks: np.ndarray) -> "Standardizer":
        pooled = np.vstack([np.asarray(b, dtype=float) for b in blocks])
        if pooled.shape[0] == 0:
            raise EmptyDataset("cannot standardize zero rows")
        return cls(pooled.mean(axis=0), np.maximum(pooled.std(axis=0), STD_FLOOR))

    def apply(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def invert(self, z):
        return np.asarray(z, dtype=float) * self.std + self.mean


def standardize_fit(rows: Sequence) -> Standardizer:
    return Standardizer.fit(np.asarray(rows, dtype=float))
