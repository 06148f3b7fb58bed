"""Dataset ingestion, standardization, splitting and synthetic generators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    ConfigurationError,
    DataFormatError,
    Dataset,
    StandardizationRecord,
    canonicalize_labels,
)

MAX_CLASSES = 32
SCALE_FLOOR = 1e-12


def _parse_float(text, row, column):
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"non-numeric value {text!r}", row=row, column=column) from None
    return value


def _labels_from_strings(raw, task=None):
    """Decide classification vs regression and build (labels, label_names)."""
    numeric = True
    values = []
    for v in raw:
        try:
            values.append(float(v))
        except ValueError:
            numeric = False
            break
    distinct = set(raw)
    if task is None:
        if not numeric:
            task = "classification"
        elif all(math.isfinite(v) and v.is_integer() for v in values) and len(distinct) <= MAX_CLASSES:
            task = "classification"
        else:
            task = "regression"
    if task == "classification":
        if len(distinct) > MAX_CLASSES:
            raise DataFormatError(f"label column has {len(distinct)} distinct values (max {MAX_CLASSES})")
        return canonicalize_labels(raw)
    if not numeric:
        raise DataFormatError("regression labels must be numeric")
    return np.array(values), ()


def load_csv(path, label_column, task=None) -> Dataset:
    """Read a headed CSV; every column except ``label_column`` is a feature.

    The label column is treated as classes when it is non-numeric, or integer
    valued with at most 32 distinct values; otherwise as a real target.
    ``task`` ("classification" / "regression") overrides the detection.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if label_column not in header:
        raise DataFormatError(f"{path}: no column named {label_column!r}")
    li = header.index(label_column)
    body = rows[1:]
    if not body:
        raise DataFormatError(f"{path}: no data rows")
    feature_cols = [j for j in range(len(header)) if j != li]
    X = np.empty((len(body), len(feature_cols)))
    raw = []
    for r, cells in enumerate(body, start=2):
        if len(cells) != len(header):
            raise DataFormatError(f"expected {len(header)} cells, got {len(cells)}", row=r)
        for k, j in enumerate(feature_cols):
            X[r - 2, k] = _parse_float(cells[j].strip(), r, header[j])
        raw.append(cells[li].strip())
    labels, names = _labels_from_strings(raw, task)
    return Dataset(X, labels, tuple(header[j] for j in feature_cols), names)


def _label_strings(ds: Dataset):
    if ds.is_classification:
        return [ds.label_names[i] for i in ds.labels]
    return [repr(float(v)) for v in ds.labels]


def save_csv(ds: Dataset, path, label_column="y"):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ds.feature_names) + [label_column])
        for x, lab in zip(ds.features, _label_strings(ds)):
            w.writerow([repr(float(v)) for v in x] + [lab])


def load_sparse(path, n_features=None, task=None) -> Dataset:
    """Read ``label idx:val ...`` lines (1-based indices) into a dense dataset."""
    path = Path(path)
    raw, entries = [], []
    with path.open(encoding="utf-8") as fh:
        for r, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            raw.append(parts[0])
            row = {}
            for tok in parts[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise DataFormatError(f"malformed pair {tok!r}", row=r)
                try:
                    j = int(idx)
                except ValueError:
                    raise DataFormatError(f"malformed index {idx!r}", row=r) from None
                if j < 1:
                    raise DataFormatError(f"feature index {j} is not 1-based", row=r)
                if j in row:
                    raise DataFormatError(f"duplicate index {j}", row=r)
                row[j] = _parse_float(val, r, j)
            entries.append(row)
    if not raw:
        raise DataFormatError(f"{path}: empty file")
    d = max((max(row) for row in entries if row), default=1)
    if n_features is not None:
        if n_features < d:
            raise DataFormatError(f"index {d} exceeds n_features={n_features}")
        d = n_features
    X = np.zeros((len(raw), d))
    for i, row in enumerate(entries):
        for j, v in row.items():
            X[i, j - 1] = v
    labels, names = _labels_from_strings(raw, task)
    return Dataset(X, labels, (), names)


def save_sparse(ds: Dataset, path):
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for x, lab in zip(ds.features, _label_strings(ds)):
            pairs = [f"{j + 1}:{float(x[j])!r}" for j in np.flatnonzero(x)]
            fh.write(" ".join([lab] + pairs) + "\n")


# -- preprocessing -------------------------------------------------------------


def standardize(ds: Dataset):
    """Center each feature and divide by its population standard deviation."""
    if ds.n < 2:
        raise ConfigurationError("standardization needs at least 2 rows")
    mean = ds.features.mean(axis=0)
    scale = np.maximum(ds.features.std(axis=0), SCALE_FLOOR)
    record = StandardizationRecord(mean, scale)
    return apply_standardization(record, ds), record


def apply_standardization(record: StandardizationRecord, ds: Dataset) -> Dataset:
    return ds.with_features(record.apply(ds.features))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ConfigurationError("train_fraction must lie in (0, 1)")


def split_indices(n, spec: SplitSpec):
    if n < 2:
        raise ConfigurationError("splitting needs at least 2 rows")
    n_train = int(round(spec.train_fraction * n))
    if n_train < 1 or n_train >= n:
        raise ConfigurationError(f"fraction {spec.train_fraction} leaves an empty side for n={n}")
    perm = np.random.default_rng(spec.seed).permutation(n)
    return perm[:n_train], perm[n_train:]


def split(ds: Dataset, spec: SplitSpec):
    train, test = split_indices(ds.n, spec)
    return ds.subset(train), ds.subset(test)


# -- synthetic data ------------------------------------------------------------------


@dataclass(frozen=True)
class GammaSpec:
    """Law of the weight vector in ``y = sign(gamma^T x + b + z)``.

    Defaults: ``ceil(d/100)`` nonzeros at random positions, alternating signs,
    common magnitude chosen so Var(gamma^T x) = ``signal_var`` under
    Bernoulli(``p_one``) features. ``center`` sets b = -E[gamma^T x], which is
    zero whenever the number of nonzeros is even.
    """

    sparsity: int | None = None
    signal_var: float = 4.0
    center: bool = True
    p_one: float = 0.75

    def n_nonzero(self, d):
        s = self.sparsity if self.sparsity is not None else math.ceil(d / 100)
        return min(max(int(s), 0), d)

    def describe(self, d):
        return {
            "sparsity": self.n_nonzero(d),
            "signal_var": self.signal_var,
            "center": self.center,
            "p_one": self.p_one,
            "signs": "alternating",
        }


def draw_gamma(d, spec: GammaSpec, rng):
    gamma = np.zeros(d)
    s = spec.n_nonzero(d)
    if s == 0 or spec.signal_var == 0:
        return gamma
    support = np.sort(rng.choice(d, size=s, replace=False))
    c = math.sqrt(spec.signal_var / (s * spec.p_one * (1 - spec.p_one)))
    gamma[support] = c * np.where(np.arange(s) % 2 == 0, 1.0, -1.0)
    return gamma


def synth_bernoulli(n, d, seed=0, gamma_spec: GammaSpec | None = None, gamma=None) -> Dataset:
    """Bernoulli(0.75) features with labels sign(gamma^T x + b + z), z ~ N(0, 1).

    Labels are +1/-1 (+1 when the argument is >= 0). ``gamma`` overrides the
    draw from ``gamma_spec``.
    """
    if n < 1 or d < 1:
        raise ConfigurationError("n and d must be positive")
    spec = gamma_spec or GammaSpec()
    rng = np.random.default_rng(seed)
    if gamma is None:
        gamma = draw_gamma(d, spec, rng)
    gamma = np.asarray(gamma, dtype=float)
    X = (rng.random((n, d)) < spec.p_one).astype(float)
    offset = -spec.p_one * gamma.sum() if spec.center else 0.0
    z = rng.standard_normal(n)
    y = np.where(X @ gamma + offset + z >= 0, 1, -1)
    return Dataset.classification(X, y)
