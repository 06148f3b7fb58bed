"""Full-batch proximal subgradient solver for the regularized dual objective

    (1/n) sum_i [F_theta(A x_i) - theta(y_i)^T A x_i] + penalty(A).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (
    ConfigurationError,
    Dataset,
    DivergenceError,
    LinearModel,
    LossSpec,
    UncertaintyBudget,
    design_matrix,
)
from .losses import dual_loss_rows, grad_f_theta_rows


@dataclass(frozen=True)
class FitOptions:
    """Solver settings.

    The step at iteration k is ``step0 / sqrt(k)``, divided by the largest
    eigenvalue of X^T X / n when ``normalize_step`` is set (estimated by
    power iteration started from a ``seed``-drawn vector). Norm penalties
    and the squared-l2 term are handled by proximal maps where available.
    """

    max_iters: int = 2000
    step0: float = 1.0
    tol: float = 1e-7
    window: int = 50
    averaging: bool = False
    normalize_step: bool = True
    seed: int = 0
    record_trace: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if not self.step0 > 0:
            raise ConfigurationError("step0 must be positive")
        if self.tol < 0:
            raise ConfigurationError("tol must be nonnegative")

    def to_dict(self):
        return asdict(self)


@dataclass
class FitTrace:
    objective_per_iter: list[float] = field(default_factory=list)
    best_objective: float = math.inf
    iters_run: int = 0
    converged: bool = False


# -- objective pieces ---------------------------------------------------------


def _row_norm(M, norm):
    if norm == "l1":
        return np.abs(M).sum(axis=-1)
    if norm == "l2":
        return np.sqrt((M * M).sum(axis=-1))
    if norm == "linf":
        return np.abs(M).max(axis=-1, initial=0.0)
    raise ConfigurationError(f"unknown norm {norm!r}")


def _norm_subgrad(v, norm):
    """A subgradient of ``norm`` at the vector ``v`` (zero at the origin)."""
    if norm == "l1":
        return np.sign(v)
    g = np.zeros_like(v)
    if norm == "l2":
        r = np.sqrt(v @ v)
        return v / r if r > 0 else g
    if norm == "linf":
        j = int(np.argmax(np.abs(v)))
        if v[j] != 0:
            g[j] = np.sign(v[j])
        return g
    raise ConfigurationError(f"unknown norm {norm!r}")


def _lp_subgrad(v, p):
    r = np.sum(np.abs(v) ** p) ** (1.0 / p)
    if r == 0:
        return np.zeros_like(v)
    return np.sign(v) * (np.abs(v) / r) ** (p - 1)


class _Objective:
    """Dual objective on a fixed design; ``pen`` masks the penalized columns."""

    def __init__(self, X, Theta, loss: LossSpec, budget: UncertaintyBudget, pen):
        self.X = X
        self.Theta = Theta
        self.loss = loss
        self.budget = budget
        self.pen = np.asarray(pen, dtype=bool)
        self.t = Theta.shape[1]
        self.eps = budget.eps_for(self.t)
        self.groups = [np.asarray(g, dtype=int) for g in budget.groups] if budget.groups else []
        self.all_pen = bool(self.pen.all())
        self.has_penalty = bool(np.any(self.eps > 0)) or (
            bool(self.groups) and bool(np.any(np.asarray(budget.group_eps) > 0))
        )
        if self.groups:
            top = max(int(g.max()) for g in self.groups)
            if top >= int(self.pen.sum()) or min(int(g.min()) for g in self.groups) < 0:
                raise ConfigurationError("group index outside the feature columns")

    # data term
    def data(self, Z):
        if self.loss.kind == "hinge":
            y = 2.0 * self.Theta[:, 0] - 1.0
            return float(np.mean(np.maximum(0.0, 1.0 - y * Z[:, 0])))
        return float(np.mean(dual_loss_rows(self.loss, Z, self.Theta)))

    def data_grad(self, Z):
        n = self.X.shape[0]
        if self.loss.kind == "hinge":
            y = 2.0 * self.Theta[:, 0] - 1.0
            active = (1.0 - y * Z[:, 0]) > 0
            G = (-(y * active))[:, None]
        else:
            G = grad_f_theta_rows(self.loss, Z) - self.Theta
        return G.T @ self.X / n

    # penalty terms
    def nonsmooth(self, A):
        if not self.has_penalty:
            return 0.0
        P = A[:, self.pen]
        if self.groups:
            total = 0.0
            for g, e in zip(self.groups, self.budget.group_eps):
                if e > 0:
                    total += e * float(np.sum(np.sum(np.abs(P[:, g]) ** self.budget.p, axis=1) ** (1 / self.budget.p)))
            return total
        return float(self.eps @ _row_norm(P, self.budget.penalty))

    def smooth(self, A):
        if self.budget.lambda_sq == 0:
            return 0.0
        P = A if self.all_pen else A[:, self.pen]
        return self.budget.lambda_sq * float(np.sum(P * P))

    def value_at(self, A, Z):
        return self.data(Z) + self.nonsmooth(A) + self.smooth(A)

    def value(self, A):
        return self.value_at(A, self.X @ A.T)

    def smooth_grad(self, A):
        if self.all_pen:
            return 2.0 * self.budget.lambda_sq * A
        g = np.zeros_like(A)
        g[:, self.pen] = 2.0 * self.budget.lambda_sq * A[:, self.pen]
        return g

    def ridge_prox(self, A, step):
        """Proximal map of step * lambda ||A_pen||_F^2. Applied after the norm
        prox it gives the joint prox, since those norms are positively
        homogeneous; it is stable for any lambda."""
        if self.budget.lambda_sq == 0:
            return A
        c = 1.0 / (1.0 + 2.0 * step * self.budget.lambda_sq)
        if self.all_pen:
            return A * c
        A = A.copy()
        A[:, self.pen] *= c
        return A

    def nonsmooth_subgrad(self, A, skip_prox=False):
        g = np.zeros_like(A)
        if not self.has_penalty:
            return g
        cols = np.flatnonzero(self.pen)
        if self.groups:
            if skip_prox and self._group_prox_ok():
                return g
            for i in range(self.t):
                for grp, e in zip(self.groups, self.budget.group_eps):
                    if e > 0:
                        g[i, cols[grp]] += e * _lp_subgrad(A[i, cols[grp]], self.budget.p)
            return g
        if skip_prox and self.budget.penalty in ("l1", "l2"):
            return g
        for i in range(self.t):
            if self.eps[i] > 0:
                g[i, cols] = self.eps[i] * _norm_subgrad(A[i, cols], self.budget.penalty)
        return g

    def _group_prox_ok(self):
        if self.budget.p != 2:
            return False
        seen = np.concatenate(self.groups)
        return len(np.unique(seen)) == len(seen)

    def prox(self, A, step):
        """Proximal map of step * (separable penalty); identity for the rest."""
        cols = np.flatnonzero(self.pen)
        if self.groups:
            if not self._group_prox_ok():
                return A
            A = A.copy()
            for grp, e in zip(self.groups, self.budget.group_eps):
                c = cols[grp]
                block = A[:, c]
                r = np.sqrt((block * block).sum(axis=1, keepdims=True))
                shrink = np.maximum(0.0, 1.0 - step * e / np.where(r > 0, r, 1.0))
                A[:, c] = block * np.where(r > 0, shrink, 0.0)
            return A
        if self.budget.penalty == "linf" or not np.any(self.eps > 0):
            return A
        A = A.copy()
        P = A[:, cols]
        thr = (step * self.eps)[:, None]
        if self.budget.penalty == "l1":
            P = np.sign(P) * np.maximum(np.abs(P) - thr, 0.0)
        else:
            r = np.sqrt((P * P).sum(axis=1, keepdims=True))
            P = P * np.maximum(0.0, 1.0 - thr / np.where(r > 0, r, 1.0))
        A[:, cols] = P
        return A


def _check_compatible(ds: Dataset, loss: LossSpec):
    if loss.kind == "quadratic":
        if ds.is_classification:
            raise ConfigurationError("the quadratic loss needs real-valued labels")
    else:
        if not ds.is_classification:
            raise ConfigurationError(f"the {loss.kind} loss needs class labels")
        if loss.kind == "hinge" and ds.encoding.t != 1:
            raise ConfigurationError("the hinge baseline is binary only")


def _objective_for(ds, loss, budget, intercept):
    _check_compatible(ds, loss)
    X = design_matrix(ds.features, intercept)
    pen = np.ones(X.shape[1], dtype=bool)
    if intercept:
        pen[-1] = False
    return _Objective(X, ds.theta(), loss, budget, pen)


def _check_shape(A, obj):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.shape != (obj.t, obj.X.shape[1]):
        raise ConfigurationError(f"A has shape {A.shape}, expected {(obj.t, obj.X.shape[1])}")
    return A


def dual_objective(A, ds: Dataset, loss: LossSpec, budget: UncertaintyBudget, intercept=False) -> float:
    """Empirical dual risk plus the budget's penalty, evaluated at ``A``.

    Groups index the columns of ``ds`` as given; overlapping groups are not
    expanded here (see :func:`expand_overlapping_groups`).
    """
    obj = _objective_for(ds, loss, budget, intercept)
    return obj.value(_check_shape(A, obj))


def subgradient(A, ds: Dataset, loss: LossSpec, budget: UncertaintyBudget, intercept=False) -> np.ndarray:
    obj = _objective_for(ds, loss, budget, intercept)
    A = _check_shape(A, obj)
    return obj.data_grad(obj.X @ A.T) + obj.smooth_grad(A) + obj.nonsmooth_subgrad(A)


# -- overlapping groups ---------------------------------------------------------


def expand_overlapping_groups(ds: Dataset, groups):
    """Duplicate every feature once per extra group that contains it.

    Returns ``(expanded dataset, column_map, disjoint_groups)`` where
    ``column_map[c]`` is the original column of expanded column ``c``. The
    original columns keep their positions; copies are appended.
    """
    groups = [tuple(int(j) for j in g) for g in groups]
    if any(len(g) == 0 for g in groups):
        raise ConfigurationError("empty group")
    for g in groups:
        if len(set(g)) != len(g) or min(g) < 0 or max(g) >= ds.d:
            raise ConfigurationError(f"invalid group {g}")
    column_map = list(range(ds.d))
    claimed = set()
    new_groups = []
    for g in groups:
        cols = []
        for j in g:
            if j in claimed:
                column_map.append(j)
                cols.append(len(column_map) - 1)
            else:
                claimed.add(j)
                cols.append(j)
        new_groups.append(tuple(cols))
    column_map = np.array(column_map, dtype=int)
    names = [ds.feature_names[j] if c < ds.d else f"{ds.feature_names[j]}#{c}" for c, j in enumerate(column_map)]
    return ds.with_features(ds.features[:, column_map], names), column_map, tuple(new_groups)


def collapse_columns(A, column_map, d):
    """Sum the coefficients of duplicated columns back onto the originals."""
    A = np.atleast_2d(A)
    out = np.zeros((A.shape[0], d) if A.shape[1] == len(column_map) else (A.shape[0], d + 1))
    np.add.at(out.T, column_map, A[:, : len(column_map)].T)
    if A.shape[1] > len(column_map):
        out[:, d:] = A[:, len(column_map):]
    return out


def _groups_overlap(groups):
    flat = [j for g in groups for j in g]
    return len(flat) != len(set(flat))


# -- solver ------------------------------------------------------------------------


def curvature_scale(X, seed=0, iters=100, rtol=1e-6) -> float:
    """Largest eigenvalue of X^T X / n by power iteration."""
    n, D = X.shape
    v = np.random.default_rng(seed).standard_normal(D)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = X.T @ (X @ v) / n
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - lam) <= rtol * new:
            return new
        lam = new
    return lam


@np.errstate(over="ignore", invalid="ignore")
def _run(obj: _Objective, opts: FitOptions):
    t, D = obj.t, obj.X.shape[1]
    A = np.zeros((t, D))
    scale = 1.0
    if opts.normalize_step:
        L = curvature_scale(obj.X, opts.seed)
        scale = L if L > 0 else 1.0
    trace = FitTrace()
    Z = obj.X @ A.T
    f = obj.value_at(A, Z)
    best, best_A = f, A
    history = [f]
    objs = [f] if opts.record_trace else []
    avg, n_avg = np.zeros_like(A), 0
    tail_start = opts.max_iters // 2 + 1
    converged = False
    k = 0
    for k in range(1, opts.max_iters + 1):
        step = opts.step0 / (scale * math.sqrt(k))
        g = obj.data_grad(Z)
        if obj.has_penalty:
            g += obj.nonsmooth_subgrad(A, skip_prox=True)
            A = obj.prox(A - step * g, step)
        else:
            A = A - step * g
        A = obj.ridge_prox(A, step)
        Z = obj.X @ A.T
        if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(A))):
            raise DivergenceError(k)
        f = obj.value_at(A, Z)
        if not math.isfinite(f):
            raise DivergenceError(k)
        if f < best:
            best, best_A = f, A
        history.append(best)
        if opts.record_trace:
            objs.append(f)
        if opts.averaging and k >= tail_start:
            avg += A
            n_avg += 1
        if k >= opts.window:
            prev = history[k - opts.window]
            if prev - best <= opts.tol * abs(prev):
                converged = True
                break
    if opts.averaging and n_avg > 0:
        A_bar = avg / n_avg
        f_bar = obj.value(A_bar)
        if opts.record_trace:
            objs.append(f_bar)
        if f_bar < best:
            best, best_A = f_bar, A_bar
    trace.objective_per_iter = objs
    trace.best_objective = best
    trace.iters_run = k
    trace.converged = converged
    return best_A, trace


def fit(
    ds: Dataset,
    loss: LossSpec,
    budget: UncertaintyBudget | None = None,
    opts: FitOptions | None = None,
    intercept: bool = False,
    standardize: bool = False,
):
    """Minimize the dual objective from A = 0; returns ``(LinearModel, FitTrace)``.

    l1 / l2 row penalties and disjoint l2 groups take a proximal step; the
    l-infinity penalty and other group exponents use a subgradient step.
    Overlapping groups are expanded into disjoint copies, fitted, and summed
    back onto the original columns.
    """
    budget = budget or UncertaintyBudget()
    opts = opts or FitOptions()
    _check_compatible(ds, loss)
    record = None
    work = ds
    if standardize:
        from .data import standardize as _standardize

        work, record = _standardize(ds)
    column_map = None
    run_budget = budget
    if budget.groups and _groups_overlap(budget.groups):
        work, column_map, new_groups = expand_overlapping_groups(work, budget.groups)
        run_budget = UncertaintyBudget(
            eps=budget.eps, penalty=budget.penalty, groups=new_groups,
            group_eps=budget.group_eps, p=budget.p, lambda_sq=budget.lambda_sq,
        )
    obj = _objective_for(work, loss, run_budget, intercept)
    A, trace = _run(obj, opts)
    if column_map is not None:
        A = collapse_columns(A, column_map, ds.d)
    model = LinearModel(
        A=A,
        encoding=ds.encoding,
        loss=loss,
        intercept=intercept,
        standardization=record,
        label_names=ds.label_names,
        budget=budget,
    )
    return model, trace

