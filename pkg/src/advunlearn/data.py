"""Labelled datasets, the synthetic grouped benchmark, splits and CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataError(ValueError):
    pass


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray
    class_count: int = 7

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.groups = np.asarray(self.groups, dtype=np.int64)
        if self.X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {self.X.shape}")
        n = self.X.shape[0]
        if self.y.shape != (n,) or self.groups.shape != (n,):
            raise DataError("features, labels and groups disagree in length")
        if n and (self.y.min() < 0 or self.y.max() >= self.class_count):
            raise DataError(f"labels must lie in [0, {self.class_count})")

    def __len__(self):
        return self.X.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.X[idx], self.y[idx], self.groups[idx], self.class_count)

    def concat(self, other: "LabeledDataset") -> "LabeledDataset":
        if other.class_count != self.class_count or other.feature_dim != self.feature_dim:
            raise DataError("cannot concatenate datasets of different shape")
        return LabeledDataset(
            np.vstack([self.X, other.X]),
            np.concatenate([self.y, other.y]),
            np.concatenate([self.groups, other.groups]),
            self.class_count,
        )

    def equals(self, other: "LabeledDataset") -> bool:
        return (
            self.class_count == other.class_count
            and self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.groups, other.groups)
        )


@dataclass
class SynthSpec:
    """Seven-class, speaker-grouped Gaussian benchmark.

    Class ``c`` is centred at ``separation * e_c``; every group (speaker)
    adds its own offset vector, shared by all of its samples.
    """

    class_count: int = 7
    n_groups: int = 30
    samples_per_group_per_class: int = 4
    feature_dim: int = 16
    separation: float = 3.0
    within_std: float = 1.0
    group_std: float = 0.5
    seed: int = 0

    def validate(self):
        if self.class_count < 2:
            raise DataError("need at least two classes")
        if self.n_groups < 3:
            raise DataError("need at least three groups")
        if self.samples_per_group_per_class < 1:
            raise DataError("samples_per_group_per_class must be positive")
        if min(self.separation, self.within_std, self.group_std) <= 0:
            raise DataError("separation and standard deviations must be positive")
        if self.feature_dim < self.class_count:
            raise DataError(
                f"feature_dim={self.feature_dim} < class_count={self.class_count}: "
                "class means need distinct axes"
            )


def synth_generate(spec: SynthSpec) -> LabeledDataset:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    C, d, k = spec.class_count, spec.feature_dim, spec.samples_per_group_per_class
    means = np.zeros((C, d))
    means[np.arange(C), np.arange(C)] = spec.separation
    offsets = rng.normal(0.0, spec.group_std, size=(spec.n_groups, d))
    y = np.tile(np.repeat(np.arange(C), k), spec.n_groups)
    groups = np.repeat(np.arange(spec.n_groups), C * k)
    X = means[y] + offsets[groups] + rng.normal(0.0, spec.within_std, size=(len(y), d))
    return LabeledDataset(X, y, groups, C)


@dataclass
class SplitSpec:
    train_fraction: float = 1 / 3
    val_fraction: float = 1 / 3
    test_fraction: float = 1 / 3
    seed: int = 0

    def validate(self):
        fr = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(not 0 < f < 1 for f in fr) or abs(sum(fr) - 1) > 1e-9:
            raise DataError(f"split fractions {fr} must lie in (0, 1) and sum to 1")


def split_by_group(ds: LabeledDataset, spec: SplitSpec):
    """Speaker-independent split: whole groups go to train, val or test."""
    spec.validate()
    uniq = np.unique(ds.groups)
    G = len(uniq)
    if G < 3:
        raise DataError(f"need at least 3 groups to split, found {G}")
    order = np.random.default_rng(spec.seed).permutation(uniq)
    n_train = min(max(1, round(G * spec.train_fraction)), G - 2)
    n_val = min(max(1, round(G * spec.val_fraction)), G - n_train - 1)
    cuts = (order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:])
    return tuple(ds.subset(np.flatnonzero(np.isin(ds.groups, part))) for part in cuts)


def select_forget(train: LabeledDataset, n: int, seed):
    """Uniformly draw ``n`` samples to forget; returns ``(forget, remain)``."""
    if not 1 <= n < len(train):
        raise DataError(f"forget count {n} must lie in [1, {len(train)})")
    perm = np.random.default_rng(seed).permutation(len(train))
    forget_idx = np.sort(perm[:n])
    mask = np.ones(len(train), dtype=bool)
    mask[forget_idx] = False
    return train.subset(forget_idx), train.subset(np.flatnonzero(mask))


def save_csv(ds: LabeledDataset, path) -> None:
    d = ds.feature_dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{j}" for j in range(d)] + ["label", "group"])
        for x, label, group in zip(ds.X, ds.y, ds.groups):
            w.writerow([format(v, ".17g") for v in x] + [int(label), int(group)])


def load_csv(path, class_count: int = 7) -> LabeledDataset:
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataError(f"{path}: empty file")
        if len(header) < 3 or header[-2:] != ["label", "group"]:
            raise DataError(f"{path}: header must be f0,...,f{{d-1}},label,group")
        d = len(header) - 2
        if header[:d] != [f"f{j}" for j in range(d)]:
            raise DataError(f"{path}: unexpected feature columns {header[:d]}")
        X, y, g = [], [], []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != d + 2:
                raise DataError(f"{path}: row {row_no} has {len(row)} fields, expected {d + 2}")
            try:
                feats = [float(v) for v in row[:d]]
                label, group = int(row[d]), int(row[d + 1])
            except ValueError as exc:
                raise DataError(f"{path}: row {row_no}: {exc}") from exc
            if not 0 <= label < class_count:
                raise DataError(f"{path}: row {row_no}: label {label} outside [0, {class_count})")
            X.append(feats)
            y.append(label)
            g.append(group)
    if not X:
        raise DataError(f"{path}: no samples")
    return LabeledDataset(np.array(X), np.array(y), np.array(g), class_count)
