import json
import math

import numpy as np
import pytest

from minimaxent.cli import run
from minimaxent.core import Dataset, LinearModel, LossSpec, TargetEncoding, UncertaintyBudget
from minimaxent.data import save_csv, synth_bernoulli
from minimaxent.persist import FORMAT_VERSION, ModelFile, SchemaError
from minimaxent.solve import fit


@pytest.fixture
def csv_path(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 3))
    y = np.where(X[:, 0] - X[:, 1] >= 0, "yes", "no")
    ds = Dataset.classification(X, y, feature_names=("a", "b", "c"))
    p = tmp_path / "d.csv"
    save_csv(ds, p, "label")
    return p


# -- model files ------------------------------------------------------------------


def test_model_file_round_trip_is_exact(tmp_path):
    ds = synth_bernoulli(50, 4, seed=0)
    model, _ = fit(ds, LossSpec.zero_one(), UncertaintyBudget(eps=0.01), standardize=True, intercept=True)
    mf = ModelFile(model, ("w", "x", "y", "z"), {"max_iters": 2000}, seed=0)
    mf.save(tmp_path / "m.json")
    back = ModelFile.load(tmp_path / "m.json")
    np.testing.assert_array_equal(back.model.A, model.A)
    np.testing.assert_array_equal(back.model.standardization.scale, model.standardization.scale)
    assert back.to_json() == mf.to_json()
    np.testing.assert_array_equal(back.model.scores(ds.features), model.scores(ds.features))


def test_unbounded_radius_serialized_as_string():
    m = LinearModel(np.array([[1.0]]), TargetEncoding.identity(), LossSpec.quadratic())
    d = ModelFile(m).to_dict()
    assert d["loss"]["rho"] == "inf"
    assert ModelFile.from_dict(d).model.loss.rho == math.inf


def test_schema_errors():
    m = LinearModel(np.array([[1.0]]), TargetEncoding.onehot(2), LossSpec.log())
    good = ModelFile(m, fit_options={"a": 1}).to_dict()
    with pytest.raises(SchemaError):
        ModelFile.from_dict(dict(good, version=FORMAT_VERSION + 1))
    with pytest.raises(SchemaError):
        ModelFile.from_dict(dict(good, format="other"))
    with pytest.raises(SchemaError):
        ModelFile.from_dict(dict(good, A={"rows": 1, "cols": 2, "values": [1.0]}))
    with pytest.raises(SchemaError):
        ModelFile.from_dict(dict(good, fit_options={"a": 2}))
    with pytest.raises(SchemaError):
        ModelFile.from_dict(dict(good, encoding={"kind": "onehot", "n_classes": 2, "t": 2}))
    with pytest.raises(SchemaError):
        ModelFile.from_dict(dict(good, feature_names=["p", "q"]))
    bad = dict(good)
    del bad["loss"]
    with pytest.raises(SchemaError):
        ModelFile.from_dict(bad)


def test_load_rejects_invalid_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{")
    with pytest.raises(SchemaError):
        ModelFile.load(p)


# -- command line -----------------------------------------------------------------


def test_train_and_predict(tmp_path, csv_path, capsys):
    out = tmp_path / "m.json"
    assert run(["train", "--data", str(csv_path), "--label", "label", "--eps", "0.01", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["feature_names"] == ["a", "b", "c"]
    trace = json.loads((tmp_path / "m.trace.json").read_text())
    assert trace["best_objective"] == min(trace["objective_per_iter"])
    assert run(["predict", "--model", str(out), "--data", str(csv_path), "--label", "label",
                "--format", "csv"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "prediction" and len(lines) == 61
    assert set(lines[1:]) <= {"yes", "no"}


def test_predict_distribution_and_reordered_columns(tmp_path, csv_path, capsys):
    out = tmp_path / "m.json"
    run(["train", "--data", str(csv_path), "--label", "label", "--loss", "log", "--out", str(out)])
    capsys.readouterr()
    text = csv_path.read_text().splitlines()
    # move column c to the front: prediction must match by name
    perm = [",".join([r.split(",")[2]] + r.split(",")[:2] + r.split(",")[3:]) for r in text]
    p2 = tmp_path / "perm.csv"
    p2.write_text("\n".join(perm) + "\n")
    run(["predict", "--model", str(out), "--data", str(csv_path), "--label", "label", "--mode", "distribution"])
    a = json.loads(capsys.readouterr().out)
    run(["predict", "--model", str(out), "--data", str(p2), "--label", "label", "--mode", "distribution"])
    b = json.loads(capsys.readouterr().out)
    assert a["predictions"] == b["predictions"]
    assert all(abs(sum(r.values()) - 1) < 1e-12 for r in a["predictions"])


def test_randomized_predictions_are_seeded(tmp_path, csv_path, capsys):
    out = tmp_path / "m.json"
    run(["train", "--data", str(csv_path), "--label", "label", "--out", str(out)])
    capsys.readouterr()
    args = ["predict", "--model", str(out), "--data", str(csv_path), "--label", "label",
            "--mode", "randomized", "--seed", "5"]
    run(args)
    first = capsys.readouterr().out
    run(args)
    assert capsys.readouterr().out == first


def test_exit_codes(tmp_path, csv_path, capsys):
    assert run([]) == 2
    assert run(["train", "--data", str(tmp_path / "missing.csv")]) == 2
    assert run(["train", "--data", str(csv_path), "--label", "nope"]) == 2
    assert run(["train", "--data", str(csv_path), "--label", "label", "--rho", "1"]) == 2
    assert run(["train", "--data", str(csv_path), "--label", "label", "--eps", "x"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"format": "minimaxent-model", "version": 99}))
    assert run(["predict", "--model", str(bad), "--data", str(csv_path)]) == 2
    assert run(["eval"]) == 2
    assert run(["synth", "--n", "5", "--d", "3"]) == 2
    err = capsys.readouterr().err
    assert "error" in err


def test_groups_file(tmp_path, csv_path):
    g = tmp_path / "groups.txt"
    g.write_text("a b\nc\n")
    out = tmp_path / "m.json"
    assert run(["train", "--data", str(csv_path), "--label", "label", "--groups", str(g),
                "--eps", "0.01", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["budget"]["groups"] == [[0, 1], [2]]
    g.write_text("a zz\n")
    assert run(["train", "--data", str(csv_path), "--label", "label", "--groups", str(g)]) == 2


def test_synth_then_eval(tmp_path, capsys):
    p = tmp_path / "s.svm"
    assert run(["synth", "--n", "60", "--d", "5", "--out", str(p), "--seed", "2"]) == 0
    meta = json.loads(capsys.readouterr().out)
    assert meta["gamma"]["sparsity"] == 1
    assert run(["eval", "--data", str(p), "--runs", "2", "--lambda-grid", "0.01,1",
                "--iters", "100", "--format", "text"]) == 0
    text = capsys.readouterr().out
    assert "mem" in text and "svm" in text
    assert run(["eval", "--synth", "40,5", "--methods", "mem,bogus", "--runs", "1"]) == 2


def test_eval_json_is_reproducible(tmp_path):
    outs = []
    for i in range(2):
        o = tmp_path / f"e{i}.json"
        run(["eval", "--synth", "50,4", "--runs", "2", "--lambda-grid", "0.1", "--iters", "100",
             "--methods", "mem,logistic", "--out", str(o)])
        d = json.loads(o.read_text())
        d.pop("wall_clock_seconds")
        outs.append(d)
    assert outs[0] == outs[1]


def test_select_sweep(tmp_path, csv_path, capsys):
    assert run(["select", "--data", str(csv_path), "--label", "label", "--k", "2", "--eps", "0.01",
                "--sweep", "3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert [r["eps_used"][0] for r in doc["reports"]] == [0.01, 0.02, 0.04]
    top = {f["name"] for f in doc["reports"][0]["ranked_features"][:2]}
    assert top == {"a", "b"}
    assert run(["select", "--data", str(csv_path), "--label", "label", "--k", "2", "--norm", "l2"]) == 2


def test_verify_gradients(capsys):
    assert run(["verify", "--suite", "gradients", "--format", "text"]) == 0
    assert "all checks passed" in capsys.readouterr().out
    assert run(["verify", "--suite", "conjugacy", "--grid", "0.5"]) == 2
