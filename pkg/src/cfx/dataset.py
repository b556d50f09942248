"""Loading, standardization and fold splitting for the benchmark datasets."""

import logging
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

logger = logging.getLogger("cfx.dataset")

BUILTIN_DATASETS = ("iris", "wine", "breastcancer", "digits")


class MalformedInputError(ValueError):
    """CSV input that cannot be parsed into a numeric labeled dataset."""


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray        # (n, d) raw units
    labels: np.ndarray          # (n,) ints in {0..K-1}
    feature_names: tuple
    n_classes: int

    def __post_init__(self):
        X, y = self.features, self.labels
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValueError("features must be a non-empty 2-d matrix")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain missing or non-finite values")
        if y.shape != (X.shape[0],):
            raise ValueError("labels must be one integer per row")
        classes = np.unique(y)
        if classes[0] != 0 or not np.array_equal(classes, np.arange(len(classes))):
            raise ValueError("labels must cover a contiguous range starting at 0")
        if self.n_classes != len(classes):
            raise ValueError("n_classes inconsistent with labels")
        if X.shape[0] < self.n_classes:
            raise ValueError("need at least one sample per class")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray             # population (1/n) scale; zero-variance -> 1
    constant: np.ndarray = None  # bool mask of features forced to std=1

    def apply(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def invert(self, Z):
        return np.asarray(Z, dtype=float) * self.std + self.mean


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray     # (n,) fold index per sample
    seed: int

    def train_indices(self, fold):
        return np.flatnonzero(self.assignments != fold)

    def test_indices(self, fold):
        return np.flatnonzero(self.assignments == fold)


def load_csv(path, label_col="label", has_header=True):
    """Parse a comma-separated numeric file into a LabeledDataset.

    label_col selects the class column either by header name or by integer
    index (negative indices count from the right).
    """
    with open(path, "r") as f:
        lines = [ln.rstrip("\n") for ln in f]
    lines = [ln for ln in lines if ln.strip() != ""]
    if has_header:
        if not lines:
            raise MalformedInputError(f"{path}: no rows")
        header = [c.strip() for c in lines[0].split(",")]
        body = lines[1:]
    else:
        header = None
        body = lines
    if not body:
        raise MalformedInputError(f"{path}: no rows")

    n_cols = len(body[0].split(","))
    if isinstance(label_col, str) and header is not None:
        try:
            label_idx = header.index(label_col)
        except ValueError:
            raise MalformedInputError(f"{path}: no column named {label_col!r}")
    else:
        try:
            label_idx = int(label_col)
        except (TypeError, ValueError):
            raise MalformedInputError(
                f"{path}: label column {label_col!r} needs a header row to resolve")
        if label_idx < 0:
            label_idx += n_cols
    if not 0 <= label_idx < n_cols:
        raise MalformedInputError(f"{path}: label column {label_col!r} out of range")

    rows, labels = [], []
    for lineno, ln in enumerate(body, start=2 if has_header else 1):
        cells = ln.split(",")
        if len(cells) != n_cols:
            raise MalformedInputError(
                f"{path}:{lineno}: expected {n_cols} columns, got {len(cells)}")
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise MalformedInputError(f"{path}:{lineno}: non-numeric value")
        lab = values.pop(label_idx)
        if lab != int(lab):
            raise MalformedInputError(f"{path}:{lineno}: non-integer label {lab}")
        rows.append(values)
        labels.append(int(lab))

    X = np.array(rows, dtype=float)
    y = np.array(labels, dtype=int)
    if header is not None:
        names = tuple(h for i, h in enumerate(header) if i != label_idx)
    else:
        names = tuple(f"f{i}" for i in range(X.shape[1]))
    return LabeledDataset(X, y, names, int(len(np.unique(y))))


def save_csv(data, path):
    """Write a dataset back out; numeric text round-trips with load_csv."""
    with open(path, "w") as f:
        f.write(",".join(list(data.feature_names) + ["label"]) + "\n")
        for row, lab in zip(data.features, data.labels):
            f.write(",".join(repr(float(v)) for v in row) + f",{int(lab)}\n")


def load_builtin(name):
    """Load one of the bundled benchmark datasets by id."""
    if name not in BUILTIN_DATASETS:
        raise ValueError(f"unknown dataset {name!r}; choose from {BUILTIN_DATASETS}")
    ref = resources.files("cfx") / "data" / f"{name}.csv"
    with resources.as_file(ref) as p:
        return load_csv(p, label_col="label", has_header=True)


def fit_standardizer(data, rows=None):
    """Per-feature mean/std over the selected rows (population 1/n variance).

    Constant features get std forced to 1 and are flagged; a warning is
    emitted so downstream covariance estimates are interpretable.
    """
    X = data.features if isinstance(data, LabeledDataset) else np.asarray(data, dtype=float)
    if rows is not None:
        rows = np.asarray(rows)
        if rows.size == 0:
            raise ValueError("rows must be nonempty")
        X = X[rows]
    if X.shape[0] == 0:
        raise ValueError("rows must be nonempty")
    mean = X.mean(axis=0)
    std = X.std(axis=0)  # ddof=0, matching the MLE covariance convention
    constant = std <= 0.0
    if np.any(constant):
        warnings.warn(f"{int(constant.sum())} constant feature(s); std forced to 1")
        std = np.where(constant, 1.0, std)
    return Standardizer(mean=mean, std=std, constant=constant)


def make_folds(n, k, seed, labels=None):
    """Deterministic k-fold plan; stratified by label when labels are given.

    Fold sizes differ by at most one, both globally and within each class.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    rng = np.random.default_rng(seed)
    if labels is None:
        order = rng.permutation(n)
    else:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise ValueError("labels length mismatch")
        parts = []
        for cls in np.unique(labels):
            idx = np.flatnonzero(labels == cls)
            parts.append(rng.permutation(idx))
        order = np.concatenate(parts)
    assignments = np.empty(n, dtype=int)
    assignments[order] = np.arange(n) % k
    return FoldPlan(k=k, assignments=assignments, seed=int(seed))
