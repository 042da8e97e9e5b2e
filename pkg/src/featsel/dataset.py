"""Tabular stress-style datasets: CSV I/O, synthesis, splitting, scaling, masking."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

CALM, STRESSFUL = 0, 1
LABEL_TOKENS = {"calm": CALM, "stressful": STRESSFUL, "0": CALM, "1": STRESSFUL}
LABEL_NAMES = {CALM: "calm", STRESSFUL: "stressful"}

DEFAULT_FEATURE_NAMES = tuple(
    [f"rgb_{i}" for i in range(1, 6)] + [f"thermal_{i}" for i in range(1, 6)]
)


class DatasetError(ValueError):
    """Malformed dataset input or an unsatisfiable split/mask request."""


class Record(NamedTuple):
    features: np.ndarray
    label: int


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable feature matrix ``X`` (n x d) with binary labels ``y``."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = DEFAULT_FEATURE_NAMES

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DatasetError("dataset must be a non-empty 2-D feature matrix")
        if y.shape != (X.shape[0],):
            raise DatasetError("label vector length does not match record count")
        if len(self.feature_names) != X.shape[1]:
            raise DatasetError(
                f"{len(self.feature_names)} feature names for {X.shape[1]} columns"
            )
        if not np.all(np.isfinite(X)):
            raise DatasetError("features must be finite")
        if not np.all((y == CALM) | (y == STRESSFUL)):
            raise DatasetError("labels must be 0 (calm) or 1 (stressful)")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def records(self) -> Iterator[Record]:
        for row, label in zip(self.X, self.y):
            yield Record(row, int(label))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.feature_names)

    def class_counts(self) -> tuple[int, int]:
        return int(np.sum(self.y == CALM)), int(np.sum(self.y == STRESSFUL))

    def equals(self, other: "Dataset") -> bool:
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )


@dataclass(frozen=True)
class FeatureMask:
    """Bit vector selecting input columns; bit order follows the column order."""

    bits: tuple[bool, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(bool(b) for b in self.bits))

    @classmethod
    def from_string(cls, dna: str) -> "FeatureMask":
        if not dna or set(dna) - {"0", "1"}:
            raise DatasetError(f"mask string must be non-empty 0/1 digits, got {dna!r}")
        return cls(tuple(c == "1" for c in dna))

    @classmethod
    def full(cls, n: int) -> "FeatureMask":
        return cls((True,) * n)

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @property
    def popcount(self) -> int:
        return sum(self.bits)

    @property
    def value(self) -> int:
        """The mask read as an unsigned binary number, first bit most significant."""
        return int(str(self), 2)

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=bool)

    def selected(self, names: Sequence[str]) -> list[str]:
        return [n for n, b in zip(names, self.bits) if b]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    stratified: bool = True
    seed: int = 0


@dataclass(frozen=True)
class SyntheticSpec:
    """Class-conditional Gaussian generator.

    Informative columns have class means at ``-d`` and ``+d`` with
    ``d = class_separation / (2 * sqrt(n_informative))``, so the Euclidean
    distance between the two class means equals ``class_separation``.
    Both classes share the identity covariance.
    """

    n_records: int = 620
    n_informative: int = 4
    n_noise: int = 6
    class_separation: float = 1.0
    label_noise_rate: float = 0.05
    seed: int = 1


@dataclass(frozen=True, eq=False)
class Standardization:
    mean: np.ndarray
    std: np.ndarray
    constant: tuple[bool, ...] = field(default=())

    def apply(self, ds: Dataset) -> Dataset:
        return Dataset((ds.X - self.mean) / self.std, ds.y, ds.feature_names)


def parse_label(token: str) -> int:
    try:
        return LABEL_TOKENS[token.strip().lower()]
    except KeyError:
        raise DatasetError(f"unknown label token {token!r}") from None


def load_csv(path) -> Dataset:
    """Read a dataset whose header lists the feature columns followed by ``label``.

    Row numbers in error messages count data rows from 1 (the header is row 0).
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if len(header) < 2 or header[-1].lower() != "label":
            raise DatasetError(f"{path}: header must end with a 'label' column")
        names = tuple(header[:-1])
        rows, labels = [], []
        for rowno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}: row {rowno} has {len(row) - 1} feature cells, "
                    f"expected {len(names)}"
                )
            try:
                values = [float(c) for c in row[:-1]]
            except ValueError:
                raise DatasetError(f"{path}: row {rowno} has a non-numeric feature cell") from None
            if not all(math.isfinite(v) for v in values):
                raise DatasetError(f"{path}: row {rowno} has a non-finite feature value")
            try:
                labels.append(parse_label(row[-1]))
            except DatasetError as exc:
                raise DatasetError(f"{path}: row {rowno}: {exc}") from None
            rows.append(values)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return Dataset(np.array(rows), np.array(labels), names)


def write_csv(ds: Dataset, path, label_style: str = "text") -> None:
    """Write ``ds`` as CSV; ``label_style`` is ``"text"`` (calm/stressful) or ``"int"``."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ds.feature_names) + ["label"])
        for row, label in zip(ds.X, ds.y):
            lab = LABEL_NAMES[int(label)] if label_style == "text" else str(int(label))
            w.writerow([repr(float(v)) for v in row] + [lab])


def synthesize(spec: SyntheticSpec, feature_names: Sequence[str] | None = None) -> Dataset:
    if spec.n_records < 2:
        raise DatasetError("need at least 2 records")
    if spec.n_informative < 0 or spec.n_noise < 0 or spec.n_informative + spec.n_noise < 1:
        raise DatasetError("need at least one feature")
    if spec.n_informative == 0 and spec.class_separation != 0:
        raise DatasetError("class_separation needs at least one informative feature")
    if not 0 <= spec.label_noise_rate < 1:
        raise DatasetError("label_noise_rate must lie in [0, 1)")
    d = spec.n_informative + spec.n_noise
    if feature_names is None:
        feature_names = (
            DEFAULT_FEATURE_NAMES if d == len(DEFAULT_FEATURE_NAMES)
            else tuple(f"f_{i + 1}" for i in range(d))
        )

    rng = np.random.default_rng(spec.seed)
    n = spec.n_records
    y = np.zeros(n, dtype=np.int64)
    y[n // 2:] = STRESSFUL
    y = rng.permutation(y)

    X = rng.standard_normal((n, d))
    if spec.n_informative:
        shift = spec.class_separation / (2.0 * math.sqrt(spec.n_informative))
        X[:, : spec.n_informative] += np.where(y == STRESSFUL, shift, -shift)[:, None]

    # Flip the same number of labels in each class so balance survives.
    observed = y.copy()
    for cls in (CALM, STRESSFUL):
        members = np.flatnonzero(y == cls)
        k = int(math.floor(spec.label_noise_rate * len(members) + 0.5))
        if k:
            observed[rng.choice(members, size=k, replace=False)] = 1 - cls
    return Dataset(X, observed, tuple(feature_names))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _stratified_train_counts(class_sizes: Sequence[int], frac: float) -> list[int]:
    target = _round_half_up(frac * sum(class_sizes))
    exact = [frac * s for s in class_sizes]
    counts = [_round_half_up(e) for e in exact]
    # Largest-remainder correction so the total hits round(frac * n).
    order = sorted(range(len(counts)), key=lambda c: exact[c] - counts[c], reverse=True)
    while sum(counts) < target:
        for c in order:
            if sum(counts) < target and counts[c] < class_sizes[c]:
                counts[c] += 1
    while sum(counts) > target:
        for c in reversed(order):
            if sum(counts) > target and counts[c] > 0:
                counts[c] -= 1
    return counts


def split_indices(ds: Dataset, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < spec.train_fraction < 1:
        raise DatasetError("train_fraction must lie strictly between 0 and 1")
    n = len(ds)
    rng = np.random.default_rng(spec.seed)
    if not spec.stratified:
        n_train = _round_half_up(spec.train_fraction * n)
        if not 0 < n_train < n:
            raise DatasetError(f"split of {n} records leaves an empty partition")
        perm = rng.permutation(n)
        return np.sort(perm[:n_train]), np.sort(perm[n_train:])

    members = [np.flatnonzero(ds.y == c) for c in (CALM, STRESSFUL)]
    for c, m in zip((CALM, STRESSFUL), members):
        if len(m) < 2:
            raise DatasetError(f"class {LABEL_NAMES[c]} has {len(m)} records; stratification needs 2")
    counts = _stratified_train_counts([len(m) for m in members], spec.train_fraction)
    train, test = [], []
    for m, k in zip(members, counts):
        perm = rng.permutation(m)
        train.append(perm[:k])
        test.append(perm[k:])
    train, test = np.sort(np.concatenate(train)), np.sort(np.concatenate(test))
    if len(train) == 0 or len(test) == 0:
        raise DatasetError(f"split of {n} records leaves an empty partition")
    return train, test


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    train, test = split_indices(ds, spec)
    return ds.subset(train), ds.subset(test)


def kfold(ds: Dataset, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold; returns ``(train_idx, validation_idx)`` pairs.

    Records are shuffled within each class, laid out class by class and dealt
    round-robin, so fold sizes and per-class fold counts each differ by at most one.
    """
    n = len(ds)
    if k < 2:
        raise DatasetError("k must be at least 2")
    if k > n:
        raise DatasetError(f"k={k} exceeds the {n} available records")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(ds.y == c)) for c in (CALM, STRESSFUL)])
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[order] = np.arange(n) % k
    all_idx = np.arange(n)
    return [(all_idx[fold_of != f], all_idx[fold_of == f]) for f in range(k)]


def apply_mask(ds: Dataset, mask: FeatureMask) -> Dataset:
    if len(mask) != ds.n_features:
        raise DatasetError(f"mask has {len(mask)} bits for {ds.n_features} features")
    if mask.popcount == 0:
        raise DatasetError("mask selects no features")
    if mask.popcount == ds.n_features:
        return ds
    cols = mask.as_array()
    return Dataset(ds.X[:, cols], ds.y, tuple(mask.selected(ds.feature_names)))


def fit_standardization(train: Dataset) -> Standardization:
    mean = train.X.mean(axis=0)
    std = train.X.std(axis=0)
    constant = std == 0
    std = np.where(constant, 1.0, std)
    # A constant column keeps its values instead of being centred.
    mean = np.where(constant, 0.0, mean)
    return Standardization(mean, std, tuple(bool(c) for c in constant))


def standardize(train: Dataset, others: Sequence[Dataset] = ()) -> tuple[list[Dataset], Standardization]:
    """Z-score every set with statistics fitted on ``train`` alone.

    Returns ``[train, *others]`` transformed, plus the fitted statistics.
    """
    stats = fit_standardization(train)
    return [stats.apply(d) for d in (train, *others)], stats
