"""Brute-force verifiers for tiny problems.

The primal side (simplex grids, entropies, moment constraints) is written
from scratch here and shares no code with :mod:`minimaxent.losses`, so that
agreement with the closed forms is an actual check.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core import CapabilityError, Dataset, LossSpec, MinimaxError, UncertaintyBudget
from .decide import mem_probs_rows
from .losses import dual_loss_rows
from .solve import dual_objective

MAX_POINTS = 4
MAX_DIM = 2
MAX_CLASSES = 3
MAX_COMBOS = 60_000_000
FEAS_SLACK = 1e-12


class InfeasibleGridError(MinimaxError):
    def __init__(self, min_violation):
        super().__init__(
            f"no grid point satisfies the moment constraints; smallest violation {min_violation:.3g}"
        )
        self.min_violation = min_violation


def _compositions(n_parts, total):
    if n_parts == 1:
        return np.array([[total]])
    blocks = []
    for head in range(total, -1, -1):
        tail = _compositions(n_parts - 1, total - head)
        blocks.append(np.hstack([np.full((tail.shape[0], 1), head), tail]))
    return np.vstack(blocks)


@functools.lru_cache(maxsize=16)
def simplex_grid(n_parts, n_cells):
    """All probability vectors of length ``n_parts`` with entries in {0, 1/n_cells, ..., 1}.

    The result is cached and read-only.
    """
    P = _compositions(n_parts, n_cells) / n_cells
    P.setflags(write=False)
    return P


def _cells(grid_step):
    if not 0 < grid_step <= 0.1:
        raise CapabilityError("grid_step must lie in (0, 0.1]")
    return int(round(1.0 / grid_step))


def _grid_entropy(kind, P):
    """Entropy of each grid distribution (rows of P), computed directly."""
    if kind == "zero-one":
        return 1.0 - P.max(axis=1)
    if kind == "log":
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(P > 0, P * np.log(P), 0.0)
        return -terms.sum(axis=1)
    raise CapabilityError(f"no grid entropy for the {kind} loss")


def conjugate_oracle(loss: LossSpec, z, grid_step: float) -> float:
    """max over a grid of distributions of H(P) + E_P[theta]^T z.

    For the quadratic loss the grid runs over the mean m in [-rho, rho] with
    the second moment pinned at rho^2, so H = rho^2 - m^2.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if loss.kind == "quadratic":
        if z.size != 1 or not math.isfinite(loss.rho):
            raise CapabilityError("quadratic oracle needs t = 1 and a finite rho")
        if not 0 < grid_step <= 0.1:
            raise CapabilityError("grid_step must lie in (0, 0.1]")
        rho = loss.rho
        m = np.linspace(-rho, rho, int(math.ceil(2 * rho / grid_step)) + 1)
        return float(np.max(rho * rho - m * m + m * z[0]))
    t = z.size
    if t > 2:
        raise CapabilityError("the conjugate oracle supports t <= 2")
    P = simplex_grid(t + 1, _cells(grid_step))
    return float(np.max(_grid_entropy(loss.kind, P) + P[:, :t] @ z))


def finite_difference_grad(f, z, h=1e-5) -> np.ndarray:
    """Central differences (f(z + h e_i) - f(z - h e_i)) / 2h."""
    if not h > 0:
        raise ValueError("h must be positive")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    g = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (f(z + e) - f(z - e)) / (2 * h)
    return g


# -- tiny instances -------------------------------------------------------------------


@dataclass(frozen=True)
class TinyInstance:
    """A handful of labelled samples small enough for exhaustive grids."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    budget: UncertaintyBudget = field(default_factory=UncertaintyBudget)
    name: str = ""

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.features, dtype=float))
        if X.shape[0] == 1 and np.ndim(self.features) == 1:
            X = X.T
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=int))
        if X.shape[1] > MAX_DIM or not 2 <= self.n_classes <= MAX_CLASSES:
            raise CapabilityError("tiny instances allow d <= 2 and 2..3 classes")
        if len(self.points) > MAX_POINTS:
            raise CapabilityError("tiny instances allow at most 4 distinct feature points")
        if self.budget.groups is not None:
            raise CapabilityError("group budgets are not supported by the oracle")

    @property
    def t(self):
        return self.n_classes - 1

    @property
    def points(self):
        return np.unique(self.features, axis=0)

    def empirical(self):
        """(distinct points, Q_X weights, Q_{Y|X} rows)."""
        pts = self.points
        n = len(self.labels)
        w = np.zeros(len(pts))
        cond = np.zeros((len(pts), self.n_classes))
        for x, y in zip(self.features, self.labels):
            k = int(np.flatnonzero(np.all(pts == x, axis=1))[0])
            w[k] += 1.0 / n
            cond[k, y] += 1.0
        return pts, w, cond / cond.sum(axis=1, keepdims=True)

    def dataset(self):
        names = tuple(str(i) for i in range(self.n_classes))
        return Dataset(self.features, self.labels, (), names)


def independence_instance(eps=0.0):
    """Samples (1,+1), (1,-1), (-1,+1), (-1,-1): labels independent of x."""
    return TinyInstance([[1.0], [1.0], [-1.0], [-1.0]], [0, 1, 0, 1], 2,
                        UncertaintyBudget(eps=eps), "independence")


def degenerate_instance(eps=0.0):
    """Samples (1,+1), (-1,-1): separable, label fixed by x."""
    return TinyInstance([[1.0], [-1.0]], [0, 1], 2, UncertaintyBudget(eps=eps), "degenerate")


def three_class_instance(eps=0.1):
    X = [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [-1.0, -1.0], [-1.0, -1.0]]
    return TinyInstance(X, [0, 1, 1, 2, 2, 0], 3, UncertaintyBudget(eps=eps), "three-class")


SHIPPED_INSTANCES = {
    "independence": independence_instance,
    "degenerate": degenerate_instance,
    "three-class": three_class_instance,
}


def _norm_last(V, norm):
    if norm == "l1":
        return np.abs(V).sum(axis=-1)
    if norm == "l2":
        return np.sqrt((V * V).sum(axis=-1))
    return np.abs(V).max(axis=-1)


@dataclass
class PrimalResult:
    value: float
    conditional: np.ndarray  # maximizing P_{Y|X} rows
    n_feasible: int


def _sweep(inst: TinyInstance, grid_step):
    """Set up the product grid over conditionals at the distinct points.

    Returns ``(G, rest, blocks)``: the per-point simplex grid, the index
    tuples for points 1..m-1, and a generator yielding, for each grid index
    ``i0`` at point 0, the feasibility mask and worst constraint violation of
    every completion in ``rest``.
    """
    pts, w, cond = inst.empirical()
    m = len(pts)
    G = simplex_grid(inst.n_classes, _cells(grid_step))
    g = G.shape[0]
    if g ** m > MAX_COMBOS:
        raise CapabilityError(f"{g}^{m} grid combinations exceed the oracle cap; use a coarser grid")
    eps = inst.budget.eps_for(inst.t)
    norm = inst.budget.constraint_norm
    target = np.einsum("k,kc,kd->cd", w, cond[:, : inst.t], pts)  # (t, d)
    contrib = np.einsum("k,gc,kd->kgcd", w, G[:, : inst.t], pts)  # (m, g, t, d)
    rest = np.array(list(itertools.product(range(g), repeat=m - 1)), dtype=int).reshape(g ** (m - 1), m - 1)
    rest_moment = np.zeros((rest.shape[0], inst.t, pts.shape[1]))
    for j in range(1, m):
        rest_moment += contrib[j][rest[:, j - 1]]

    def blocks():
        for i0 in range(g):
            viol = _norm_last(rest_moment + contrib[0][i0] - target, norm) - eps
            worst = viol.max(axis=1)
            yield i0, worst <= FEAS_SLACK, worst

    return G, rest, blocks()


def _rest_sum(rest, w, table):
    """sum_{j>=1} w_j * table[rest[:, j-1], j] for per-point value tables."""
    out = np.zeros(rest.shape[0])
    for j in range(1, len(w)):
        out += w[j] * table[rest[:, j - 1], j]
    return out


def primal_search(inst: TinyInstance, loss: LossSpec, grid_step: float) -> PrimalResult:
    """Maximize sum_x Q_X(x) H(P_{Y|X=x}) over the product of conditional
    simplex grids subject to the cross-moment constraints of the budget."""
    _, w, _ = inst.empirical()
    G, rest, blocks = _sweep(inst, grid_step)
    H = _grid_entropy(loss.kind, G)
    rest_H = _rest_sum(rest, w, np.repeat(H[:, None], len(w), axis=1))
    best, best_idx, n_feasible = -math.inf, None, 0
    min_violation = math.inf
    for i0, feasible, worst in blocks:
        min_violation = min(min_violation, float(worst.min()))
        if not feasible.any():
            continue
        n_feasible += int(feasible.sum())
        vals = np.where(feasible, rest_H + w[0] * H[i0], -np.inf)
        k = int(np.argmax(vals))
        if vals[k] > best:
            best = float(vals[k])
            best_idx = (i0,) + tuple(rest[k])
    if best_idx is None:
        raise InfeasibleGridError(min_violation)
    return PrimalResult(best, G[list(best_idx)], n_feasible)


def primal_max_condent(inst: TinyInstance, loss: LossSpec, grid_step: float) -> float:
    return primal_search(inst, loss, grid_step).value


def worst_case_rule_loss(inst: TinyInstance, rule_probs, grid_step: float) -> float:
    """max over the feasible grid of the expected 0-1 loss of a randomized
    rule; ``rule_probs[k]`` is the label law used at distinct point k."""
    _, w, _ = inst.empirical()
    G, rest, blocks = _sweep(inst, grid_step)
    L = 1.0 - G @ np.asarray(rule_probs, dtype=float).T  # (g, m)
    rest_L = _rest_sum(rest, w, L)
    best = -math.inf
    for i0, feasible, _ in blocks:
        if feasible.any():
            best = max(best, float(np.where(feasible, rest_L + w[0] * L[i0, 0], -np.inf).max()))
    if best == -math.inf:
        raise InfeasibleGridError(math.nan)
    return best


# -- dual grid search -------------------------------------------------------------------

DUAL_EVAL_BUDGET = 200_000


def _dual_values(cands, X, Theta, loss, budget):
    """Dual objective for each candidate row-major A in ``cands`` (K, t*d)."""
    K = cands.shape[0]
    t, d = Theta.shape[1], X.shape[1]
    A = cands.reshape(K, t, d)
    Z = np.einsum("ktd,nd->knt", A, X).reshape(-1, t)
    data = dual_loss_rows(loss, Z, np.tile(Theta, (K, 1))).reshape(K, -1).mean(axis=1)
    eps = budget.eps_for(t)
    pen = _norm_last(A, budget.penalty) @ eps
    return data + pen + budget.lambda_sq * (A * A).sum(axis=(1, 2))


def _box(center, half_width, count, radius):
    axes = [np.clip(np.linspace(c - half_width, c + half_width, count), -radius, radius) for c in center]
    axes = [np.unique(a) for a in axes]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass
class DualityReport:
    instance: str
    loss: str
    primal: float
    dual: float
    gap: float
    tolerance: float
    inconclusive_at_boundary: bool
    passed: bool
    argmin: list = field(default_factory=list)

    def to_dict(self):
        return dict(self.__dict__)


def duality_tolerance(inst: TinyInstance, loss: LossSpec, grid_step: float) -> float:
    """Combined grid tolerance: grid_step * (1 + max_i ||x_i||_1), plus
    grid_step * log(c / grid_step) for the log loss (entropy is not Lipschitz
    at the simplex boundary)."""
    tol = grid_step * (1.0 + float(np.abs(inst.features).sum(axis=1).max()))
    if loss.kind == "log":
        tol += grid_step * math.log(inst.n_classes / grid_step)
    return tol


def dual_grid_min(inst: TinyInstance, loss: LossSpec, grid_step: float, radius: float = 6.0):
    """Minimize the dual objective over a centered hypercube of half-width
    ``radius``: one coarse sweep, then zoom around the incumbent until the
    spacing reaches ``grid_step``.

    Returns ``(value, argmin, boundary_min)`` where ``boundary_min`` is the
    smallest value seen on the faces of the cube.
    """
    X = inst.features
    Theta = inst.dataset().theta()
    D = inst.t * X.shape[1]
    count = int(math.ceil(2 * radius / grid_step)) + 1
    count = min(count, max(5, int(DUAL_EVAL_BUDGET ** (1.0 / D))))
    cands = _box(np.zeros(D), radius, count, radius)
    vals = _dual_values(cands, X, Theta, loss, inst.budget)
    on_face = np.any(np.abs(cands) >= radius - 1e-12, axis=1)
    boundary_min = float(vals[on_face].min())
    spacing = 2 * radius / (count - 1)
    best_val = float(vals.min())
    while True:
        ties = np.flatnonzero(vals <= vals.min() + 1e-12)
        k = ties[np.argmin(np.abs(cands[ties]).sum(axis=1))]
        center, best_val = cands[k], float(vals[k])
        if spacing <= grid_step * (1 + 1e-9):
            break
        half = spacing
        spacing = max(grid_step, 2 * half / (count - 1))
        n_pts = int(round(2 * half / spacing)) + 1
        cands = _box(center, half, n_pts, radius)
        vals = _dual_values(cands, X, Theta, loss, inst.budget)
    return best_val, center.reshape(inst.t, X.shape[1]), boundary_min


def check_duality(inst: TinyInstance, loss: LossSpec, grid_step: float = 0.01,
                  dual_search_radius: float = 6.0) -> DualityReport:
    """Compare the primal grid maximum with the dual grid minimum.

    The report is inconclusive when the dual minimum over the cube is also
    reached on its faces: the objective may keep decreasing outside, as in
    separable data where the infimum is approached at infinity. It passes
    when conclusive and |primal - dual| <= :func:`duality_tolerance`.
    """
    primal = primal_max_condent(inst, loss, grid_step)
    dual, A, boundary_min = dual_grid_min(inst, loss, grid_step, dual_search_radius)
    # the reported dual value comes from the solver's own objective
    dual = dual_objective(A, inst.dataset(), loss, inst.budget)
    gap = abs(primal - dual)
    tol = duality_tolerance(inst, loss, grid_step)
    inconclusive = boundary_min <= dual + 1e-9
    return DualityReport(
        instance=inst.name, loss=loss.kind, primal=primal, dual=float(dual), gap=gap,
        tolerance=tol, inconclusive_at_boundary=bool(inconclusive),
        passed=bool(gap <= tol and not inconclusive), argmin=A.tolist(),
    )


def saddle_point_check(inst: TinyInstance, A, grid_step: float = 0.01):
    """Worst-case expected 0-1 loss of the randomized rule built from ``A``
    at each distinct point, over the feasible grid."""
    pts, _, _ = inst.empirical()
    Z = pts @ np.atleast_2d(A).T
    probs = mem_probs_rows(Z)[0]
    return worst_case_rule_loss(inst, probs, grid_step)


# -- verification suites ------------------------------------------------------------

CONJUGACY_TOL = 0.02
GRADIENT_RTOL = 1e-5
PLANE_SLACK = 1e-9
DEGENERATE_DUAL_MAX = 0.05
THREE_CLASS_MIN_STEP = 0.05


@dataclass
class Check:
    suite: str
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def to_dict(self):
        return dict(self.__dict__)


def conjugacy_checks(grid_step: float = 0.005, n_points: int = 100, seed: int = 0) -> list[Check]:
    """Largest |f_theta(z) - conjugate_oracle(z)| over seeded random points."""
    from .losses import f_theta

    rng = np.random.default_rng(seed)
    cases = [(LossSpec.zero_one(), t, 3.0) for t in (1, 2)]
    cases += [(LossSpec.log(), t, 3.0) for t in (1, 2)]
    cases.append((LossSpec.quadratic(1.0), 1, 4.0))
    out = []
    for loss, t, box in cases:
        Z = rng.uniform(-box, box, size=(n_points, t))
        err = max(abs(f_theta(loss, z) - conjugate_oracle(loss, z, grid_step)) for z in Z)
        name = f"{loss.kind} t={t}" + (f" rho={loss.rho:g}" if loss.kind == "quadratic" else "")
        out.append(Check("conjugacy", name, float(err), CONJUGACY_TOL, bool(err <= CONJUGACY_TOL),
                         f"{n_points} points in [-{box:g}, {box:g}]^{t}, grid {grid_step:g}"))
    return out


def _relative_error(g, ref):
    scale = max(float(np.max(np.abs(ref))), 1e-12)
    return float(np.max(np.abs(g - ref))) / scale


def gradient_checks(n_points: int = 100, seed: int = 0, h: float = 1e-5) -> list[Check]:
    """Analytic gradients against central differences; 0-1 subgradients
    against the supporting-plane inequality."""
    from .losses import f_theta, grad_f_theta

    rng = np.random.default_rng(seed)
    out = []
    smooth = [(LossSpec.log(), t) for t in (1, 2, 3)]
    smooth += [(LossSpec.quadratic(), 1), (LossSpec.quadratic(1.0), 1)]
    for loss, t in smooth:
        worst = 0.0
        for z in rng.uniform(-3, 3, size=(n_points, t)):
            fd = finite_difference_grad(lambda v: f_theta(loss, v), z, h)
            worst = max(worst, _relative_error(np.atleast_1d(grad_f_theta(loss, z)), fd))
        name = f"{loss.kind} t={t}" + (f" rho={loss.rho:g}" if loss.kind == "quadratic" else "")
        out.append(Check("gradients", name, worst, GRADIENT_RTOL, bool(worst <= GRADIENT_RTOL),
                         f"{n_points} points, central differences h={h:g}"))
    loss = LossSpec.zero_one()
    for t in (1, 2, 5):
        Z = rng.uniform(-3, 3, size=(n_points, t))
        W = rng.uniform(-3, 3, size=(n_points, t))
        F_z = np.array([f_theta(loss, z) for z in Z])
        F_w = np.array([f_theta(loss, w) for w in W])
        G = np.array([grad_f_theta(loss, z) for z in Z]).reshape(n_points, t)
        # slack[i, j] = F(w_j) - F(z_i) - g_i . (w_j - z_i), must be >= 0
        slack = F_w[None, :] - F_z[:, None] - (G @ W.T - np.sum(G * Z, axis=1)[:, None])
        worst = float(-slack.min())
        out.append(Check("gradients", f"zero-one plane t={t}", worst, PLANE_SLACK,
                         bool(worst <= PLANE_SLACK), f"{n_points}x{n_points} pairs, largest violation"))
    return out


def duality_checks(grid_step: float = 0.01) -> list[Check]:
    """Primal/dual agreement on the shipped tiny instances."""
    out = []
    for loss in (LossSpec.zero_one(), LossSpec.log()):
        rep = check_duality(independence_instance(), loss, grid_step)
        out.append(Check("duality", f"independence {loss.kind}", rep.gap, rep.tolerance, rep.passed,
                         f"primal {rep.primal:.6f}, dual {rep.dual:.6f}"))
    for loss in (LossSpec.zero_one(), LossSpec.log()):
        rep = check_duality(degenerate_instance(), loss, grid_step)
        ok = rep.inconclusive_at_boundary and rep.dual <= DEGENERATE_DUAL_MAX
        out.append(Check("duality", f"degenerate {loss.kind}", rep.dual, DEGENERATE_DUAL_MAX, bool(ok),
                         "expected inconclusive at the search boundary"
                         f" (flag {rep.inconclusive_at_boundary}), dual {rep.dual:.6f}"))
    step = max(grid_step, THREE_CLASS_MIN_STEP)
    rep = check_duality(three_class_instance(), LossSpec.zero_one(), step)
    out.append(Check("duality", "three-class zero-one", rep.gap, rep.tolerance, rep.passed,
                     f"primal {rep.primal:.6f}, dual {rep.dual:.6f}, grid {step:g}"))
    return out


SUITES = ("conjugacy", "gradients", "duality")


def run_suite(name: str, grid_step: float | None = None, seed: int = 0) -> list[Check]:
    """Run one verification suite (or ``all``); ``grid_step`` defaults to
    0.005 for conjugacy and 0.01 for duality."""
    if name == "all":
        return [c for s in SUITES for c in run_suite(s, grid_step, seed)]
    if name == "conjugacy":
        return conjugacy_checks(grid_step or 0.005, seed=seed)
    if name == "gradients":
        return gradient_checks(seed=seed)
    if name == "duality":
        return duality_checks(grid_step or 0.01)
    raise CapabilityError(f"unknown suite {name!r}")
