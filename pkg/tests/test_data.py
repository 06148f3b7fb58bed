import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minimaxent.core import ConfigurationError, DataFormatError, Dataset
from minimaxent.data import (
    GammaSpec,
    SplitSpec,
    apply_standardization,
    draw_gamma,
    load_csv,
    load_sparse,
    save_csv,
    save_sparse,
    split,
    split_indices,
    standardize,
    synth_bernoulli,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_csv_classification(tmp_path):
    p = write(tmp_path, "a.csv", "a,y,b\n1,1,2\n3,-1,4\n5,1,6\n")
    ds = load_csv(p, "y")
    assert ds.feature_names == ("a", "b")
    assert ds.label_names == ("1", "-1")
    assert ds.labels.tolist() == [0, 1, 0]
    np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4], [5, 6]])


def test_csv_regression_detection_and_override(tmp_path):
    p = write(tmp_path, "r.csv", "x,y\n1,0.5\n2,1.5\n")
    assert not load_csv(p, "y").is_classification
    q = write(tmp_path, "c.csv", "x,y\n1,1\n2,2\n3,1\n")
    assert load_csv(q, "y").is_classification
    assert not load_csv(q, "y", task="regression").is_classification


def test_csv_errors_name_the_cell(tmp_path):
    p = write(tmp_path, "bad.csv", "x,y\n1,1\nfoo,2\n")
    with pytest.raises(DataFormatError) as err:
        load_csv(p, "y")
    assert err.value.row == 3 and err.value.column == "x"
    with pytest.raises(DataFormatError):
        load_csv(write(tmp_path, "short.csv", "x,y\n1\n"), "y")
    with pytest.raises(DataFormatError):
        load_csv(p, "label")
    with pytest.raises(DataFormatError):
        load_csv(write(tmp_path, "empty.csv", ""), "y")


def test_too_many_classes_for_strings(tmp_path):
    body = "\n".join(f"{i},c{i}" for i in range(40))
    with pytest.raises(DataFormatError):
        load_csv(write(tmp_path, "m.csv", "x,y\n" + body + "\n"), "y")


def test_csv_round_trip(tmp_path):
    ds = Dataset.classification(np.random.default_rng(0).normal(size=(6, 2)), [0, 1, 2, 0, 1, 2],
                                feature_names=("u", "v"))
    save_csv(ds, tmp_path / "o.csv")
    back = load_csv(tmp_path / "o.csv", "y")
    np.testing.assert_array_equal(back.features, ds.features)
    assert back.labels.tolist() == ds.labels.tolist()


def test_sparse_reader(tmp_path):
    p = write(tmp_path, "s.svm", "+1 1:0.5 3:2\n-1 2:1 # comment\n\n")
    ds = load_sparse(p)
    np.testing.assert_array_equal(ds.features, [[0.5, 0, 2], [0, 1, 0]])
    assert ds.labels.tolist() == [0, 1]
    assert load_sparse(p, n_features=5).d == 5
    with pytest.raises(DataFormatError):
        load_sparse(p, n_features=2)


@pytest.mark.parametrize("text", ["1 0:1\n", "1 a:1\n", "1 2\n", "1 1:1 1:2\n", "1 1:x\n", ""])
def test_sparse_reader_errors(tmp_path, text):
    with pytest.raises(DataFormatError):
        load_sparse(write(tmp_path, "e.svm", text))


def test_sparse_round_trip(tmp_path):
    ds = synth_bernoulli(20, 7, seed=1)
    save_sparse(ds, tmp_path / "o.svm")
    back = load_sparse(tmp_path / "o.svm", n_features=7)
    np.testing.assert_array_equal(back.features, ds.features)
    assert [back.label_names[i] for i in back.labels] == [ds.label_names[i] for i in ds.labels]


def test_standardize_moments_and_reuse():
    rng = np.random.default_rng(0)
    X = rng.normal(3, 2, size=(50, 3))
    X[:, 2] = 1.0
    ds = Dataset.regression(X, X[:, 0])
    out, rec = standardize(ds)
    np.testing.assert_allclose(out.features[:, :2].mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(out.features[:, :2].std(axis=0), 1, atol=1e-12)
    np.testing.assert_array_equal(out.features[:, 2], 0.0)
    np.testing.assert_array_equal(apply_standardization(rec, ds).features, out.features)
    with pytest.raises(ConfigurationError):
        standardize(Dataset.regression([[1.0]], [1.0]))


@given(st.integers(2, 200), st.floats(0.05, 0.95), st.integers(0, 10**6))
def test_split_is_partition(n, frac, seed):
    try:
        tr, te = split_indices(n, SplitSpec(frac, seed))
    except ConfigurationError:
        assert round(frac * n) in (0, n)
        return
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(n))
    assert len(tr) == round(frac * n)


def test_split_deterministic():
    ds = synth_bernoulli(30, 4, seed=0)
    a, b = split(ds, SplitSpec(0.5, 3)), split(ds, SplitSpec(0.5, 3))
    np.testing.assert_array_equal(a[0].features, b[0].features)
    with pytest.raises(ConfigurationError):
        SplitSpec(1.0)


def test_gamma_defaults():
    spec = GammaSpec()
    assert spec.n_nonzero(2000) == 20 and spec.n_nonzero(50) == 1
    g = draw_gamma(2000, spec, np.random.default_rng(0))
    nz = g[g != 0]
    assert nz.size == 20
    # Var(gamma^T x) under Bernoulli(0.75) features
    assert (nz**2).sum() * 0.75 * 0.25 == pytest.approx(4.0)
    assert (nz > 0).sum() == (nz < 0).sum() == 10
    assert not draw_gamma(10, GammaSpec(signal_var=0), np.random.default_rng(0)).any()


def test_synth_shape_and_determinism():
    a, b = synth_bernoulli(100, 50, seed=4), synth_bernoulli(100, 50, seed=4)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert set(np.unique(a.features)) <= {0.0, 1.0}
    assert a.label_names == ("1", "-1")
    assert abs(a.features.mean() - 0.75) < 0.05
    with pytest.raises(ConfigurationError):
        synth_bernoulli(0, 3)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_synth_labels_follow_explicit_gamma(seed):
    gamma = np.array([10.0, 0.0, 0.0])
    ds = synth_bernoulli(400, 3, seed=seed, gamma=gamma)
    # with |gamma^T x + b| >= 2.5 the noise rarely flips the sign
    y = np.where(ds.labels == 0, 1, -1)
    agree = y == np.where(ds.features @ gamma - 0.75 * gamma.sum() >= 0, 1, -1)
    assert agree.mean() > 0.95
    assert math.isfinite(ds.features.sum())
