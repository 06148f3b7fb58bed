import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minimaxent.core import ConfigurationError, Dataset, DivergenceError, LossSpec, UncertaintyBudget
from minimaxent.losses import minimax_hinge
from minimaxent.oracle import finite_difference_grad, independence_instance
from minimaxent.solve import (
    FitOptions,
    collapse_columns,
    curvature_scale,
    dual_objective,
    expand_overlapping_groups,
    fit,
    subgradient,
)

ZO, LOG = LossSpec.zero_one(), LossSpec.log()
NONE = UncertaintyBudget()


def binary(n=40, d=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = np.where(X @ rng.normal(size=d) + 0.5 * rng.normal(size=n) >= 0, 1, -1)
    return Dataset.classification(X, y)


def test_objective_at_zero():
    ds = binary()
    assert dual_objective(np.zeros((1, 3)), ds, ZO, NONE) == 0.5
    assert dual_objective(np.zeros((1, 3)), ds, LOG, NONE) == pytest.approx(math.log(2))
    inst = independence_instance()
    assert dual_objective([[0.0]], inst.dataset(), ZO, NONE) == 0.5


def test_objective_shape_check():
    with pytest.raises(ConfigurationError):
        dual_objective(np.zeros((1, 2)), binary(), ZO, NONE)


@given(st.integers(0, 1000))
def test_objective_equals_mean_minimax_hinge(seed):
    ds = binary(seed=seed)
    A = np.random.default_rng(seed).normal(size=(1, 3))
    y = np.where(ds.labels == 0, 1.0, -1.0)
    margins = y * (ds.features @ A[0])
    assert dual_objective(A, ds, ZO, NONE) == pytest.approx(np.mean(minimax_hinge(margins)), abs=1e-12)


def test_penalties_add_up():
    ds = binary()
    A = np.array([[1.0, -2.0, 0.5]])
    base = dual_objective(A, ds, ZO, NONE)
    assert dual_objective(A, ds, ZO, UncertaintyBudget(eps=0.1)) == pytest.approx(base + 0.35)
    assert dual_objective(A, ds, ZO, UncertaintyBudget(eps=0.1, penalty="linf")) == pytest.approx(base + 0.2)
    l2 = base + 0.1 * math.sqrt(5.25)
    assert dual_objective(A, ds, ZO, UncertaintyBudget(eps=0.1, penalty="l2")) == pytest.approx(l2)
    assert dual_objective(A, ds, ZO, UncertaintyBudget(lambda_sq=2.0)) == pytest.approx(base + 10.5)
    grp = UncertaintyBudget(groups=[[0, 1], [2]], group_eps=[1.0, 2.0])
    assert dual_objective(A, ds, ZO, grp) == pytest.approx(base + math.sqrt(5) + 1.0)


def test_intercept_is_not_penalized():
    ds = binary()
    A = np.array([[0.0, 0.0, 0.0, 3.0]])
    b = UncertaintyBudget(eps=1.0, lambda_sq=1.0)
    assert dual_objective(A, ds, ZO, b, intercept=True) == dual_objective(A, ds, ZO, NONE, intercept=True)


def test_subgradient_log_at_zero():
    ds = binary()
    g = subgradient(np.zeros((1, 3)), ds, LOG, NONE)
    expected = ((0.5 - ds.theta()[:, 0]) @ ds.features) / ds.n
    np.testing.assert_allclose(g[0], expected, atol=1e-15)


def test_subgradient_l1_at_zero_is_zero():
    ds = binary()
    g0 = subgradient(np.zeros((1, 3)), ds, LOG, NONE)
    g1 = subgradient(np.zeros((1, 3)), ds, LOG, UncertaintyBudget(eps=0.3))
    np.testing.assert_array_equal(g0, g1)


@pytest.mark.parametrize("loss", [LOG, LossSpec.quadratic(), LossSpec.quadratic(1.0)])
def test_subgradient_matches_finite_differences(loss):
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 3))
    ds = Dataset.regression(X, X @ [1.0, -1.0, 0.5]) if loss.kind == "quadratic" else binary()
    for _ in range(5):
        A = rng.normal(size=3)
        g = subgradient(A, ds, loss, NONE).ravel()
        fd = finite_difference_grad(lambda a: dual_objective(a, ds, loss, NONE), A)
        np.testing.assert_allclose(g, fd, atol=1e-4)


@given(st.integers(0, 10_000), st.floats(0, 1))
def test_objective_is_convex(seed, lam):
    rng = np.random.default_rng(seed)
    ds = Dataset.classification(rng.normal(size=(21, 2)), rng.permutation(np.arange(21) % 3))
    b = UncertaintyBudget(eps=[0.1, 0.3], penalty="l2", lambda_sq=0.05)
    A1, A2 = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    mid = dual_objective(lam * A1 + (1 - lam) * A2, ds, ZO, b)
    assert mid <= lam * dual_objective(A1, ds, ZO, b) + (1 - lam) * dual_objective(A2, ds, ZO, b) + 1e-9


def test_independence_fit_reaches_half():
    inst = independence_instance()
    _, trace = fit(inst.dataset(), ZO, NONE, FitOptions(max_iters=2000))
    assert trace.best_objective <= 0.5 + 1e-3


def test_separable_fit_goes_to_zero():
    ds = Dataset.classification([[1.0], [-1.0], [2.0], [-0.5]], [1, -1, 1, -1])
    _, trace = fit(ds, ZO, NONE, FitOptions(max_iters=2000))
    assert trace.best_objective <= 0.05
    best = np.minimum.accumulate(trace.objective_per_iter)
    assert best[-1] == trace.best_objective


def test_least_squares_equivalence():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 5))
    y = X @ rng.normal(size=5) + 0.1 * rng.normal(size=50)
    # tol=0 runs until the best objective stalls exactly
    model, _ = fit(Dataset.regression(X, y), LossSpec.quadratic(), opts=FitOptions(tol=0.0))
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    # in unbounded mode the conditional mean is (A x) / 2
    assert np.max(np.abs(model.A[0] / 2 - beta)) <= 1e-6


def test_multiclass_fit_decreases_objective():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(60, 2))
    y = np.argmax(X @ [[1.0, -1.0, 0.0], [0.0, 1.0, -1.0]], axis=1)
    ds = Dataset.classification(X, y)
    for loss in (ZO, LOG):
        _, trace = fit(ds, loss)
        assert trace.best_objective < dual_objective(np.zeros((2, 2)), ds, loss, NONE)


def test_regularizer_monotone_in_eps():
    ds = binary(seed=4)
    values = [fit(ds, LOG, UncertaintyBudget(eps=e))[1].best_objective for e in (0.0, 0.05, 0.2, 1.0)]
    assert all(a <= b + 1e-9 for a, b in zip(values, values[1:]))


def test_large_l1_budget_gives_zero_model():
    model, _ = fit(binary(), ZO, UncertaintyBudget(eps=10.0))
    np.testing.assert_array_equal(model.A, 0.0)


@pytest.mark.parametrize("budget", [
    UncertaintyBudget(eps=0.05, penalty="l2"),
    UncertaintyBudget(eps=0.05, penalty="linf"),
    UncertaintyBudget(groups=[[0, 1], [2]], group_eps=0.05),
    UncertaintyBudget(groups=[[0, 1], [2]], group_eps=0.05, p=3.0),
])
def test_other_penalties_fit(budget):
    ds = binary(seed=5)
    _, trace = fit(ds, LOG, budget)
    assert trace.best_objective < math.log(2)
    assert np.all(np.diff(np.minimum.accumulate(trace.objective_per_iter)) <= 0)


def test_fit_is_deterministic():
    ds = binary(seed=6)
    m1, t1 = fit(ds, ZO, UncertaintyBudget(eps=0.01), FitOptions(averaging=True))
    m2, t2 = fit(ds, ZO, UncertaintyBudget(eps=0.01), FitOptions(averaging=True))
    np.testing.assert_array_equal(m1.A, m2.A)
    assert t1.objective_per_iter == t2.objective_per_iter


def test_averaging_never_worse_than_best_iterate():
    ds = binary(seed=7)
    _, plain = fit(ds, ZO, NONE, FitOptions(max_iters=300, tol=0))
    _, avg = fit(ds, ZO, NONE, FitOptions(max_iters=300, tol=0, averaging=True))
    assert avg.best_objective <= plain.best_objective


def test_incompatible_combinations():
    with pytest.raises(ConfigurationError):
        fit(binary(), LossSpec.quadratic())
    with pytest.raises(ConfigurationError):
        fit(Dataset.regression([[1.0], [2.0]], [0.5, 1.5]), ZO)
    ds3 = Dataset.classification(np.eye(3), [0, 1, 2])
    with pytest.raises(ConfigurationError):
        fit(ds3, LossSpec.hinge())


def test_divergence_reported():
    X = np.array([[1e200], [-1e200]])
    ds = Dataset.regression(X, [1e200, -1e200])
    with pytest.raises(DivergenceError) as err:
        fit(ds, LossSpec.quadratic(), opts=FitOptions(normalize_step=False, step0=1.0))
    assert err.value.iteration >= 1


def test_options_validation():
    with pytest.raises(ConfigurationError):
        FitOptions(max_iters=0)
    with pytest.raises(ConfigurationError):
        FitOptions(step0=0)


def test_curvature_scale_matches_spectral_norm():
    X = np.random.default_rng(0).normal(size=(30, 8))
    assert curvature_scale(X) == pytest.approx(np.linalg.norm(X, 2) ** 2 / 30, rel=1e-4)
    assert curvature_scale(np.zeros((3, 2))) == 0.0


def test_expand_overlapping_groups():
    ds = Dataset.classification(np.arange(12.0).reshape(4, 3), [1, -1, 1, -1])
    wide, cmap, groups = expand_overlapping_groups(ds, [[0, 1], [1, 2]])
    assert wide.d == 4
    assert cmap.tolist() == [0, 1, 2, 1]
    assert groups == ((0, 1), (3, 2))
    np.testing.assert_array_equal(wide.features[:, 3], ds.features[:, 1])
    same, cmap2, g2 = expand_overlapping_groups(ds, [[0], [1, 2]])
    assert same.d == 3 and g2 == ((0,), (1, 2))
    whole, _, _ = expand_overlapping_groups(ds, [[0, 1, 2]])
    assert whole.d == 3
    with pytest.raises(ConfigurationError):
        expand_overlapping_groups(ds, [[]])


def test_collapse_preserves_scores():
    ds = Dataset.classification(np.random.default_rng(0).normal(size=(5, 3)), [1, -1, 1, -1, 1])
    wide, cmap, _ = expand_overlapping_groups(ds, [[0, 1], [1, 2]])
    A = np.array([[0.3, -1.0, 2.0, 0.7]])
    np.testing.assert_allclose(wide.features @ A[0], ds.features @ collapse_columns(A, cmap, 3)[0])


def test_overlapping_group_fit_returns_original_width():
    ds = binary(seed=8)
    model, trace = fit(ds, LOG, UncertaintyBudget(groups=[[0, 1], [1, 2]], group_eps=0.02))
    assert model.A.shape == (1, 3)
    assert trace.best_objective < math.log(2)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 100))
def test_best_objective_envelope_monotone(seed):
    _, trace = fit(binary(seed=seed), ZO, UncertaintyBudget(eps=0.01), FitOptions(max_iters=200))
    envelope = np.minimum.accumulate(trace.objective_per_iter)
    assert trace.best_objective == envelope[-1]


@pytest.mark.parametrize("lam", [1e3, 1e8])
def test_large_ridge_weight_is_stable(lam):
    model, trace = fit(binary(seed=9), ZO, UncertaintyBudget(lambda_sq=lam), FitOptions(max_iters=100))
    assert np.all(np.isfinite(model.A))
    assert trace.best_objective <= 0.5 + 1e-12


def test_ridge_minimizer_matches_closed_form():
    # quadratic unbounded + ridge: mean((A x)^2/4 - y A x) + lam ||A||^2 has a linear optimality system
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 3))
    y = X @ [1.0, -2.0, 0.5]
    lam = 0.3
    model, _ = fit(Dataset.regression(X, y), LossSpec.quadratic(), UncertaintyBudget(lambda_sq=lam),
                   FitOptions(tol=0.0, max_iters=5000))
    n = len(y)
    a = np.linalg.solve(X.T @ X / (2 * n) + 2 * lam * np.eye(3), X.T @ y / n)
    np.testing.assert_allclose(model.A[0], a, atol=1e-5)
