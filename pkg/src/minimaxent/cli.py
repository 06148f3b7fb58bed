"""``minimaxent`` command line: train, predict, eval, select, synth, verify.

Exit codes: 0 success, 1 verification failure, 2 usage or data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from .core import ConfigurationError, DataFormatError, Dataset, LossSpec, MinimaxError, UncertaintyBudget
from .decide import predict
from .evaluation import METHOD_FACTORIES, DEFAULT_LAMBDA_GRID, Method, Protocol, monte_carlo_eval
from .oracle import run_suite
from .persist import ModelFile, SchemaError
from .selection import eps_sweep, select_features
from .solve import FitOptions, fit

DEFAULT_SEED = 0
SPARSE_SUFFIXES = (".svm", ".libsvm", ".sparse", ".txt")


class UsageError(MinimaxError):
    pass


# -- argument parsing ---------------------------------------------------------------


def _shared(p: argparse.ArgumentParser, solver=True):
    g = p.add_argument_group("shared options")
    if solver:
        g.add_argument("--loss", choices=("log", "zero-one", "quadratic"), default="zero-one")
        g.add_argument("--rho", type=float, default=None, help="second-moment radius (quadratic loss)")
        g.add_argument("--lambda", dest="lam", type=float, default=0.0, help="squared-l2 weight")
        g.add_argument("--eps", type=str, default="0", help="slack per encoding row, comma separated")
        g.add_argument("--norm", choices=("l1", "l2", "linf"), default="l1", help="penalty norm")
        g.add_argument("--groups", type=Path, default=None, help="feature groups file, one group per line")
        g.add_argument("--intercept", action="store_true")
        g.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True)
        g.add_argument("--iters", type=int, default=2000)
        g.add_argument("--step0", type=float, default=1.0)
        g.add_argument("--tol", type=float, default=1e-7)
    g.add_argument("--seed", type=int, default=DEFAULT_SEED)
    g.add_argument("--out", type=Path, default=None, help="output file (stdout when omitted)")
    g.add_argument("--format", choices=("json", "csv", "text"), default="json")


def _data_args(p, required=True):
    p.add_argument("--data", type=Path, required=required, help="CSV with a header, or label idx:val lines")
    p.add_argument("--label", default="y", help="label column of a CSV file")
    p.add_argument("--task", choices=("classification", "regression"), default=None)
    p.add_argument("--n-features", type=int, default=None, help="feature count for sparse files")


def build_parser():
    parser = argparse.ArgumentParser(prog="minimaxent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write a model file")
    _data_args(p)
    _shared(p)
    p.add_argument("--trace", type=Path, default=None, help="objective trace file (default: <out>.trace.json)")

    p = sub.add_parser("predict", help="apply a model file to data")
    p.add_argument("--model", type=Path, required=True)
    _data_args(p)
    p.add_argument("--mode", choices=("label", "distribution", "randomized", "mean"), default="label")
    _shared(p, solver=False)

    p = sub.add_parser("eval", help="Monte Carlo train/test comparison")
    _data_args(p, required=False)
    p.add_argument("--synth", type=str, default=None, metavar="N,D", help="evaluate on a synthetic dataset")
    p.add_argument("--methods", default="mem,svm,logistic", help=f"comma list from {sorted(METHOD_FACTORIES)}")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--lambda-grid", type=str, default=None, help="comma list (default 2^-10..2^10)")
    _shared(p)

    p = sub.add_parser("select", help="robust feature selection with l1 budgets")
    _data_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--sweep", type=int, default=1, help="number of doubling eps levels to report")
    _shared(p)

    p = sub.add_parser("synth", help="write a synthetic Bernoulli-feature dataset")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--d", type=int, default=2000)
    p.add_argument("--sparsity", type=int, default=None, help="nonzeros in gamma (default ceil(d/100))")
    p.add_argument("--signal-var", type=float, default=4.0)
    p.add_argument("--center", action=argparse.BooleanOptionalAction, default=True)
    _shared(p, solver=False)

    p = sub.add_parser("verify", help="run the brute-force oracle suites")
    p.add_argument("--suite", choices=("conjugacy", "gradients", "duality", "all"), default="all")
    p.add_argument("--grid", type=float, default=None)
    _shared(p, solver=False)
    return parser


# -- helpers ------------------------------------------------------------------------


def _floats(text, flag):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from None


def _load(args) -> Dataset:
    path = args.data
    if not path.exists():
        raise UsageError(f"--data: file not found: {path}")
    if path.suffix.lower() in SPARSE_SUFFIXES:
        return data_mod.load_sparse(path, args.n_features, args.task)
    return data_mod.load_csv(path, args.label, args.task)


def _read_groups(path: Path, ds: Dataset):
    if not path.exists():
        raise UsageError(f"--groups: file not found: {path}")
    names = {n: j for j, n in enumerate(ds.feature_names)}
    groups = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].replace(",", " ").split()
        if not line:
            continue
        group = []
        for tok in line:
            if tok in names:
                group.append(names[tok])
            elif tok.isdigit() and int(tok) < ds.d:
                group.append(int(tok))
            else:
                raise UsageError(f"--groups: {path} line {lineno}: unknown feature {tok!r}")
        groups.append(tuple(group))
    if not groups:
        raise UsageError(f"--groups: {path} lists no groups")
    return groups


def _loss(args) -> LossSpec:
    if args.loss == "quadratic":
        return LossSpec.quadratic(math.inf if args.rho is None else args.rho)
    if args.rho is not None:
        raise UsageError("--rho only applies to --loss quadratic")
    return LossSpec(args.loss)


def _budget(args, ds: Dataset) -> UncertaintyBudget:
    eps = _floats(args.eps, "--eps") or [0.0]
    if args.groups is not None:
        groups = _read_groups(args.groups, ds)
        return UncertaintyBudget(groups=groups, group_eps=eps if len(eps) > 1 else eps[0], lambda_sq=args.lam)
    return UncertaintyBudget(eps=eps if len(eps) > 1 else eps[0], penalty=args.norm, lambda_sq=args.lam)


def _options(args) -> FitOptions:
    return FitOptions(max_iters=args.iters, step0=args.step0, tol=args.tol, seed=args.seed)


def _emit(args, text: str):
    if args.out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        args.out.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def _rows_to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- subcommands --------------------------------------------------------------------


def cmd_train(args):
    ds = _load(args)
    loss = _loss(args)
    budget = _budget(args, ds)
    opts = _options(args)
    model, trace = fit(ds, loss, budget, opts, args.intercept, args.standardize)
    fit_options = dict(opts.to_dict(), standardize=args.standardize, intercept=args.intercept)
    mf = ModelFile(model, ds.feature_names, fit_options, args.seed)
    _emit(args, mf.to_json())
    trace_path = args.trace
    if trace_path is None and args.out is not None:
        trace_path = args.out.with_suffix(".trace.json")
    if trace_path is not None:
        trace_doc = {
            "seed": args.seed,
            "best_objective": trace.best_objective,
            "iters_run": trace.iters_run,
            "converged": trace.converged,
            "objective_per_iter": trace.objective_per_iter,
        }
        trace_path.write_text(json.dumps(trace_doc, indent=2) + "\n", encoding="utf-8")
    return 0


def _features_for(mf: ModelFile, args):
    """Feature matrix ordered as the model expects, matched by column name."""
    path = args.data
    if not path.exists():
        raise UsageError(f"--data: file not found: {path}")
    if path.suffix.lower() in SPARSE_SUFFIXES:
        X = data_mod.load_sparse(path, args.n_features or mf.model.n_features, args.task).features
        return X
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    names = mf.feature_names or tuple(h for h in header if h != args.label)
    missing = [n for n in names if n not in header]
    if missing:
        raise DataFormatError(f"{path}: missing feature columns {missing}")
    cols = [header.index(n) for n in names]
    X = np.empty((len(rows) - 1, len(cols)))
    for r, cells in enumerate(rows[1:], start=2):
        if len(cells) != len(header):
            raise DataFormatError(f"expected {len(header)} cells, got {len(cells)}", row=r)
        for k, j in enumerate(cols):
            try:
                X[r - 2, k] = float(cells[j])
            except ValueError:
                raise DataFormatError(f"non-numeric value {cells[j]!r}", row=r, column=header[j]) from None
    return X


def cmd_predict(args):
    if not args.model.exists():
        raise UsageError(f"--model: file not found: {args.model}")
    mf = ModelFile.load(args.model)
    model = mf.model
    X = _features_for(mf, args)
    names = list(model.label_names)
    if args.mode == "distribution":
        P = predict(model, X, "distribution")
        header = [f"p_{n}" for n in names]
        rows = [[repr(float(v)) for v in row] for row in P]
        payload = [dict(zip(names, map(float, row))) for row in P]
    elif args.mode == "mean":
        pred = predict(model, X, "mean")
        header, rows = ["prediction"], [[repr(float(v))] for v in pred]
        payload = [float(v) for v in pred]
    else:
        pred = predict(model, X, args.mode, seed=args.seed)
        labels = [names[i] if names else str(int(i)) for i in pred]
        header, rows = ["prediction"], [[lab] for lab in labels]
        payload = labels
    if args.format == "csv":
        _emit(args, _rows_to_csv(header, rows))
    elif args.format == "text":
        _emit(args, "\n".join(" ".join(r) for r in rows))
    else:
        _emit(args, json.dumps({"mode": args.mode, "seed": args.seed, "predictions": payload}, indent=2))
    return 0


def cmd_eval(args):
    if args.synth is not None:
        if args.data is not None:
            raise UsageError("--data and --synth are mutually exclusive")
        n, d = (int(v) for v in _floats(args.synth, "--synth"))
        ds = data_mod.synth_bernoulli(n, d, seed=args.seed)
        notes = {"dataset": f"synthetic n={n} d={d}", "gamma": data_mod.GammaSpec().describe(d)}
    elif args.data is not None:
        ds = _load(args)
        notes = {"dataset": str(args.data)}
    else:
        raise UsageError("eval needs --data or --synth")
    opts = _options(args)
    methods = []
    for name in (m.strip() for m in args.methods.split(",") if m.strip()):
        if name not in METHOD_FACTORIES:
            raise UsageError(f"--methods: unknown method {name!r}")
        m = METHOD_FACTORIES[name](opts)
        methods.append(Method(m.name, m.loss, m.metric, opts, args.standardize, args.intercept))
    grid = tuple(_floats(args.lambda_grid, "--lambda-grid")) if args.lambda_grid else DEFAULT_LAMBDA_GRID
    protocol = Protocol(runs=args.runs, outer_train_fraction=args.train_fraction,
                        lambda_grid=grid, base_seed=args.seed)
    notes["seed"] = args.seed
    report = monte_carlo_eval(ds, methods, protocol, notes)
    if args.format == "csv":
        _emit(args, report.to_csv())
    elif args.format == "text":
        _emit(args, report.to_text())
    else:
        _emit(args, report.to_json())
    return 0


def cmd_select(args):
    ds = _load(args)
    eps = _floats(args.eps, "--eps") or [0.0]
    if len(eps) != 1:
        raise UsageError("--eps: select takes a single starting value")
    if args.groups is not None or args.norm != "l1":
        raise UsageError("select uses l1 row budgets; drop --groups/--norm")
    loss = _loss(args)
    opts = _options(args)
    reports = [
        select_features(ds, loss, args.k, e, opts, args.threshold, args.intercept, args.standardize)
        for e in eps_sweep(eps[0], 2.0, max(args.sweep, 1))
    ]
    if args.format == "text":
        _emit(args, "\n\n".join(f"eps = {r.eps_used[0]:g}\n{r.to_text()}" for r in reports))
    elif args.format == "csv":
        rows = [[repr(r.eps_used[0]), rank, j, (r.feature_names[j] if r.feature_names else j), repr(v)]
                for r in reports for rank, (j, v) in enumerate(r.ranked_features, start=1)]
        _emit(args, _rows_to_csv(["eps", "rank", "column", "feature", "importance"], rows))
    else:
        doc = {"seed": args.seed, "reports": [r.to_dict() for r in reports]}
        _emit(args, json.dumps(doc, indent=2))
    return 0


def cmd_synth(args):
    spec = data_mod.GammaSpec(sparsity=args.sparsity, signal_var=args.signal_var, center=args.center)
    ds = data_mod.synth_bernoulli(args.n, args.d, seed=args.seed, gamma_spec=spec)
    if args.out is None:
        raise UsageError("--out is required for synth")
    if args.out.suffix.lower() in SPARSE_SUFFIXES:
        data_mod.save_sparse(ds, args.out)
    else:
        data_mod.save_csv(ds, args.out)
    meta = {"n": args.n, "d": args.d, "seed": args.seed, "gamma": spec.describe(args.d)}
    sys.stdout.write(json.dumps(meta) + "\n")
    return 0


def cmd_verify(args):
    checks = run_suite(args.suite, args.grid, args.seed)
    ok = all(c.passed for c in checks)
    if args.format == "json":
        _emit(args, json.dumps({"suite": args.suite, "seed": args.seed, "passed": ok,
                                "checks": [c.to_dict() for c in checks]}, indent=2))
    elif args.format == "csv":
        rows = [[c.suite, c.name, repr(c.value), repr(c.tolerance), c.passed] for c in checks]
        _emit(args, _rows_to_csv(["suite", "check", "value", "tolerance", "passed"], rows))
    else:
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.suite:<10} {c.name:<28} {c.value:.3g} "
                 f"(tol {c.tolerance:.3g})  {c.detail}" for c in checks]
        lines.append(f"{'all checks passed' if ok else 'VERIFICATION FAILED'}")
        _emit(args, "\n".join(lines))
    return 0 if ok else 1


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "select": cmd_select,
    "synth": cmd_synth,
    "verify": cmd_verify,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, SchemaError, DataFormatError, ConfigurationError, MinimaxError, OSError) as exc:
        sys.stderr.write(f"minimaxent {args.command}: error: {exc}\n")
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
