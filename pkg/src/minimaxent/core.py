"""Domain types shared by every module: datasets, target encodings, loss
selectors, uncertainty budgets and fitted linear models.

Class labels are stored as 0-based indices into ``label_names``. The last
class is the one dropped by the one-hot encoding (its theta vector is zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LOSS_KINDS = ("log", "zero-one", "quadratic", "hinge")
PENALTY_NORMS = ("l1", "l2", "linf")
# constraint norm on the cross-moments for each penalty (dual) norm
CONSTRAINT_NORM = {"l1": "linf", "l2": "l2", "linf": "l1"}


class MinimaxError(Exception):
    """Base class for errors raised by this package."""


class InvalidLabelError(MinimaxError):
    pass


class NumericInputError(MinimaxError):
    pass


class DistributionError(MinimaxError):
    pass


class ConfigurationError(MinimaxError):
    pass


class ModeError(MinimaxError):
    pass


class CapabilityError(MinimaxError):
    pass


class DataFormatError(MinimaxError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class DivergenceError(MinimaxError):
    def __init__(self, iteration):
        super().__init__(f"objective became non-finite at iteration {iteration}")
        self.iteration = iteration


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TargetEncoding:
    """One-hot-minus-last (``kind="onehot"``) or identity encoding."""

    kind: str
    n_classes: int = 0

    def __post_init__(self):
        if self.kind == "onehot":
            if self.n_classes < 2:
                raise ConfigurationError("one-hot encoding needs at least 2 classes")
        elif self.kind == "identity":
            object.__setattr__(self, "n_classes", 0)
        else:
            raise ConfigurationError(f"unknown encoding kind {self.kind!r}")

    @classmethod
    def onehot(cls, n_classes):
        return cls("onehot", int(n_classes))

    @classmethod
    def identity(cls):
        return cls("identity")

    @property
    def t(self):
        return self.n_classes - 1 if self.kind == "onehot" else 1


def encode_target(label, enc: TargetEncoding) -> np.ndarray:
    """theta(label) as a length-t vector.

    For one-hot, class ``i < t`` maps to the unit vector e_i and the last
    class ``t`` maps to zero.
    """
    if enc.kind == "identity":
        value = float(label)
        if not math.isfinite(value):
            raise NumericInputError(f"non-finite target {label!r}")
        return np.array([value])
    if isinstance(label, (bool, np.bool_)) or int(label) != label:
        raise InvalidLabelError(f"class index must be an integer, got {label!r}")
    label = int(label)
    if not 0 <= label < enc.n_classes:
        raise InvalidLabelError(
            f"class index {label} out of range for {enc.n_classes} classes"
        )
    theta = np.zeros(enc.t)
    if label < enc.t:
        theta[label] = 1.0
    return theta


def encode_targets(labels, enc: TargetEncoding) -> np.ndarray:
    """Vectorized :func:`encode_target`; returns an ``(n, t)`` matrix."""
    labels = np.asarray(labels)
    if enc.kind == "identity":
        theta = labels.astype(float).reshape(-1, 1)
        if not np.all(np.isfinite(theta)):
            raise NumericInputError("non-finite regression target")
        return theta
    idx = labels.astype(int)
    if np.any(idx != labels) or np.any(idx < 0) or np.any(idx >= enc.n_classes):
        raise InvalidLabelError("class index out of range")
    theta = np.zeros((len(idx), enc.t))
    rows = np.flatnonzero(idx < enc.t)
    theta[rows, idx[rows]] = 1.0
    return theta


def _label_sort_key(values):
    try:
        nums = [float(v) for v in values]
    except (TypeError, ValueError):
        return sorted(values, key=str)
    order = sorted(range(len(values)), key=lambda i: nums[i])
    ordered = [values[i] for i in order]
    if len(ordered) == 2:
        # binary: larger value (e.g. +1) is class 0, so theta = 1 for the positive label
        ordered.reverse()
    return ordered


def canonicalize_labels(raw) -> tuple[np.ndarray, tuple[str, ...]]:
    """Map raw class labels to indices ``0..c-1`` and their names.

    Numeric binary labels put the larger value first (``+1 -> 0``, ``-1 -> 1``);
    otherwise labels are sorted ascending (numerically when possible).
    """
    raw = [str(v) for v in raw]
    distinct = list(dict.fromkeys(raw))
    names = tuple(_label_sort_key(distinct))
    lookup = {name: i for i, name in enumerate(names)}
    return np.array([lookup[v] for v in raw], dtype=int), names


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with class-index or real labels.

    ``label_names`` is non-empty exactly for classification data.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = ()
    label_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.array(self.features, dtype=float, copy=True)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        X.setflags(write=False)
        object.__setattr__(self, "features", X)
        if self.label_names:
            y = np.array(self.labels, copy=True)
            if y.dtype.kind == "f" and np.all(np.isfinite(y)) and np.all(y == np.round(y)):
                y = y.astype(int)
            y.setflags(write=False)
        else:
            y = _frozen(self.labels)
        object.__setattr__(self, "labels", y)
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "label_names", tuple(str(s) for s in self.label_names))

    @classmethod
    def classification(cls, features, raw_labels, feature_names=()):
        idx, names = canonicalize_labels(raw_labels)
        return cls(features, idx, tuple(feature_names), names)

    @classmethod
    def regression(cls, features, targets, feature_names=()):
        return cls(features, np.asarray(targets, dtype=float), tuple(feature_names), ())

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def is_classification(self):
        return bool(self.label_names)

    @property
    def n_classes(self):
        return len(self.label_names)

    @property
    def encoding(self) -> TargetEncoding:
        if self.is_classification:
            return TargetEncoding.onehot(max(self.n_classes, 2))
        return TargetEncoding.identity()

    def theta(self) -> np.ndarray:
        return encode_targets(self.labels, self.encoding)

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.features[rows], self.labels[rows], self.feature_names, self.label_names)

    def with_features(self, features, feature_names=None) -> "Dataset":
        names = self.feature_names if feature_names is None else tuple(feature_names)
        return Dataset(features, self.labels, names, self.label_names)


def validate_dataset(ds: Dataset) -> list[str]:
    """Return a list of human-readable violations; empty means valid."""
    problems = []
    X = np.asarray(ds.features)
    if X.ndim != 2:
        return [f"features must be a 2-D matrix, got {X.ndim} dimensions"]
    n, d = X.shape
    if n < 1:
        problems.append("dataset has no rows")
    if d < 1:
        problems.append("dataset has no feature columns")
    if len(ds.feature_names) != d:
        problems.append(f"feature_names has length {len(ds.feature_names)}, expected {d}")
    for r, c in zip(*np.nonzero(~np.isfinite(X))):
        problems.append(f"non-finite feature value at row {r}, column {c}")
    labels = np.asarray(ds.labels)
    if labels.shape != (n,):
        problems.append(f"labels have shape {labels.shape}, expected ({n},)")
        return problems
    if ds.is_classification:
        c = ds.n_classes
        for r, v in enumerate(labels):
            if not (float(v).is_integer() and 0 <= v < c):
                problems.append(f"label {v} at row {r} outside class range 0..{c - 1}")
    else:
        for r in np.flatnonzero(~np.isfinite(labels.astype(float))):
            problems.append(f"non-finite regression target at row {r}")
    return problems


@dataclass(frozen=True)
class LossSpec:
    """Loss selector. ``rho`` is the second-moment radius (quadratic only);
    ``math.inf`` selects the unbounded mode F(z) = z^2/4.

    ``hinge`` is the SVM baseline; it has no conjugate and is used only by the
    solver and the evaluation harness.
    """

    kind: str
    rho: float | None = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigurationError(f"unknown loss {self.kind!r}; expected one of {LOSS_KINDS}")
        if self.kind == "quadratic":
            rho = math.inf if self.rho is None else float(self.rho)
            if not rho > 0:
                raise ConfigurationError("rho must be positive")
            object.__setattr__(self, "rho", rho)
        elif self.rho is not None:
            raise ConfigurationError("rho is only meaningful for the quadratic loss")

    @classmethod
    def log(cls):
        return cls("log")

    @classmethod
    def zero_one(cls):
        return cls("zero-one")

    @classmethod
    def quadratic(cls, rho=math.inf):
        return cls("quadratic", rho)

    @classmethod
    def hinge(cls):
        return cls("hinge")

    @property
    def is_classification(self):
        return self.kind != "quadratic"


@dataclass(frozen=True)
class UncertaintyBudget:
    """Cross-moment slack and the matching regularizer.

    ``eps`` holds one slack per encoding row, penalizing each row of A with
    the ``penalty`` norm (the dual of the constraint norm). With ``groups``
    the per-row penalty is replaced by sum_j group_eps[j] * ||A_i[I_j]||_p.
    ``lambda_sq`` adds lambda * ||A||_F^2.
    """

    eps: np.ndarray | float = 0.0
    penalty: str = "l1"
    groups: tuple[tuple[int, ...], ...] | None = None
    group_eps: np.ndarray | float | None = None
    p: float = 2.0
    lambda_sq: float = 0.0

    def __post_init__(self):
        if self.penalty not in PENALTY_NORMS:
            raise ConfigurationError(f"unknown penalty norm {self.penalty!r}")
        eps = np.atleast_1d(np.asarray(self.eps, dtype=float)).copy()
        if np.any(eps < 0) or not np.all(np.isfinite(eps)):
            raise ConfigurationError("eps must be finite and nonnegative")
        eps.setflags(write=False)
        object.__setattr__(self, "eps", eps)
        if not self.lambda_sq >= 0:
            raise ConfigurationError("lambda_sq must be nonnegative")
        object.__setattr__(self, "lambda_sq", float(self.lambda_sq))
        if self.groups is not None:
            groups = tuple(tuple(int(j) for j in g) for g in self.groups)
            if any(len(g) == 0 for g in groups):
                raise ConfigurationError("empty group")
            if np.any(eps > 0):
                raise ConfigurationError("row penalties and group penalties cannot both be active")
            if not self.p >= 1:
                raise ConfigurationError("group norm exponent p must be >= 1")
            geps = np.asarray(0.0 if self.group_eps is None else self.group_eps, dtype=float)
            geps = np.broadcast_to(geps, (len(groups),)).copy()
            if np.any(geps < 0):
                raise ConfigurationError("group eps must be nonnegative")
            geps.setflags(write=False)
            object.__setattr__(self, "groups", groups)
            object.__setattr__(self, "group_eps", geps)

    @property
    def constraint_norm(self):
        return CONSTRAINT_NORM[self.penalty]

    def eps_for(self, t) -> np.ndarray:
        if self.eps.size == 1:
            return np.full(t, float(self.eps[0]))
        if self.eps.size != t:
            raise ConfigurationError(f"eps has length {self.eps.size}, expected {t}")
        return np.asarray(self.eps)

    def to_dict(self):
        out = {
            "eps": [float(e) for e in self.eps],
            "penalty": self.penalty,
            "lambda_sq": self.lambda_sq,
        }
        if self.groups is not None:
            out["groups"] = [list(g) for g in self.groups]
            out["group_eps"] = [float(e) for e in self.group_eps]
            out["p"] = float(self.p)
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(
            eps=d.get("eps", 0.0),
            penalty=d.get("penalty", "l1"),
            groups=d.get("groups"),
            group_eps=d.get("group_eps"),
            p=d.get("p", 2.0),
            lambda_sq=d.get("lambda_sq", 0.0),
        )


@dataclass(frozen=True)
class StandardizationRecord:
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen(self.mean))
        object.__setattr__(self, "scale", _frozen(self.scale))
        if np.any(self.scale <= 0):
            raise ConfigurationError("standardization scale entries must be positive")

    def apply(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale


@dataclass(frozen=True)
class LinearModel:
    """Coefficients ``A`` (t x d, plus a trailing intercept column when
    ``intercept`` is set) together with everything needed to score raw rows."""

    A: np.ndarray
    encoding: TargetEncoding
    loss: LossSpec
    intercept: bool = False
    standardization: StandardizationRecord | None = None
    label_names: tuple[str, ...] = ()
    budget: UncertaintyBudget = field(default_factory=UncertaintyBudget)

    def __post_init__(self):
        A = _frozen(np.atleast_2d(self.A))
        object.__setattr__(self, "A", A)
        if A.shape[0] != self.encoding.t:
            raise ConfigurationError(
                f"A has {A.shape[0]} rows but the encoding has t={self.encoding.t}"
            )
        if self.standardization is not None and self.standardization.mean.shape[0] != self.n_features:
            raise ConfigurationError("standardization record does not match feature count")
        object.__setattr__(self, "label_names", tuple(self.label_names))

    @property
    def t(self):
        return self.A.shape[0]

    @property
    def n_features(self):
        return self.A.shape[1] - int(self.intercept)

    def design(self, X) -> np.ndarray:
        """Raw feature rows -> the matrix the coefficients act on."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ConfigurationError(
                f"expected {self.n_features} features, got {X.shape[1]}"
            )
        if self.standardization is not None:
            X = self.standardization.apply(X)
        if self.intercept:
            X = np.hstack([X, np.ones((X.shape[0], 1))])
        return X

    def scores(self, X) -> np.ndarray:
        """Linear predictor ``A x`` for each row; shape (n, t)."""
        return self.design(X) @ self.A.T


def design_matrix(X, intercept: bool) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if intercept:
        return np.hstack([X, np.ones((X.shape[0], 1))])
    return X

