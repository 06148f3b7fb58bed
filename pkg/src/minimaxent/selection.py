"""Robust feature selection through l1-penalized dual fits.

Columns are ranked by ||A^(j)||_inf, the largest coefficient any encoding
row puts on feature j, so every row shares one sparsity pattern.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ConfigurationError, Dataset, LossSpec, UncertaintyBudget
from .solve import FitOptions, fit

REL_THRESHOLD = 1e-6


def column_importance(A, n_features=None) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if n_features is not None:
        A = A[:, :n_features]
    return np.abs(A).max(axis=0, initial=0.0)


def support(A, threshold: float = 0.0) -> set[int]:
    """Columns whose largest absolute coefficient exceeds ``threshold``."""
    if threshold < 0:
        raise ConfigurationError("threshold must be nonnegative")
    return {int(j) for j in np.flatnonzero(column_importance(A) > threshold)}


@dataclass
class SelectionReport:
    ranked_features: list[tuple[int, float]]
    support: list[int]
    achieved_k: int
    eps_used: list[float]
    k: int
    threshold: float
    feature_names: list[str] = field(default_factory=list)

    @property
    def exactly_sparse(self):
        """Whether the fitted support already satisfies ||A||_{0,inf} <= k."""
        return self.achieved_k <= self.k

    @property
    def selected(self):
        """The support when it fits in k, otherwise the k top-ranked columns."""
        if self.exactly_sparse:
            return sorted(self.support)
        return sorted(j for j, _ in self.ranked_features[: self.k])

    def to_dict(self):
        return {
            "k": self.k,
            "achieved_k": self.achieved_k,
            "exactly_sparse": self.exactly_sparse,
            "selected": self.selected,
            "support": self.support,
            "threshold": self.threshold,
            "eps_used": self.eps_used,
            "ranked_features": [
                {"column": j, "name": self.feature_names[j] if self.feature_names else str(j), "importance": v}
                for j, v in self.ranked_features
            ],
        }

    def to_text(self):
        width = max([len(n) for n in self.feature_names] + [7])
        lines = [f"{'rank':>4}  {'column':>6}  {'feature':<{width}}  importance"]
        for r, (j, v) in enumerate(self.ranked_features, start=1):
            name = self.feature_names[j] if self.feature_names else str(j)
            mark = " *" if j in self.support else ""
            lines.append(f"{r:>4}  {j:>6}  {name:<{width}}  {v:.6g}{mark}")
        lines.append(f"support size {self.achieved_k} (k = {self.k}); "
                     f"{'sparse enough' if self.exactly_sparse else 'NOT exactly sparse: increase eps'}")
        return "\n".join(lines)


def select_features(
    ds: Dataset,
    loss: LossSpec,
    k: int,
    eps,
    opts: FitOptions | None = None,
    threshold: float | None = None,
    intercept: bool = False,
    standardize: bool = False,
) -> SelectionReport:
    """Fit with l1 row penalties ``eps`` and rank columns by importance.

    ``threshold`` defaults to 1e-6 times the largest importance. When more
    than ``k`` columns survive, the report says so rather than forcing
    sparsity.
    """
    if not 1 <= k <= ds.d:
        raise ConfigurationError(f"k must lie in 1..{ds.d}, got {k}")
    budget = UncertaintyBudget(eps=eps, penalty="l1")
    eps_used = budget.eps_for(ds.encoding.t)
    model, _ = fit(ds, loss, budget, opts, intercept=intercept, standardize=standardize)
    imp = column_importance(model.A, ds.d)
    if threshold is None:
        threshold = REL_THRESHOLD * float(imp.max(initial=0.0))
    order = sorted(range(ds.d), key=lambda j: (-imp[j], j))
    sup = sorted(j for j in range(ds.d) if imp[j] > threshold)
    return SelectionReport(
        ranked_features=[(j, float(imp[j])) for j in order],
        support=sup,
        achieved_k=len(sup),
        eps_used=[float(e) for e in eps_used],
        k=k,
        threshold=float(threshold),
        feature_names=list(ds.feature_names),
    )


def eps_sweep(eps0: float, factor: float = 2.0, levels: int = 5) -> list[float]:
    """Geometric grid eps0, eps0*factor, ... of the given length."""
    return [eps0 * factor**i for i in range(levels)]
