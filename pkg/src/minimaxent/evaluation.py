"""Error metrics, lambda tuning and the Monte Carlo train/test protocol."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import ConfigurationError, Dataset, LinearModel, LossSpec, ModeError, UncertaintyBudget
from .data import SplitSpec, split_indices
from .decide import label_distribution_rows, predict
from .solve import FitOptions, fit

SCHEMA_VERSION = 1
DEFAULT_LAMBDA_GRID = tuple(2.0**k for k in range(-10, 11))
SVM_TIE_RULE = "score 0 predicts the first class (the +1 label)"


def error_rate(model: LinearModel, ds: Dataset, mode: str = "label", seed: int | None = None) -> float:
    """Misclassification rate.

    ``label``: argmax predictions. ``expected``: exact expected 0-1 loss of
    the randomized rule, mean of 1 - P(true label). ``sampled``: one seeded
    draw per row.
    """
    if model.loss.kind == "quadratic" or not ds.is_classification:
        raise ModeError("error rates need a classification model and class labels")
    y = np.asarray(ds.labels)
    if mode == "label":
        return float(np.mean(predict(model, ds.features, "label") != y))
    if mode == "expected":
        P = label_distribution_rows(model, model.scores(ds.features))
        return float(np.mean(1.0 - P[np.arange(len(y)), y]))
    if mode == "sampled":
        return float(np.mean(predict(model, ds.features, "randomized", seed=seed) != y))
    raise ModeError(f"unknown error mode {mode!r}")


def mse(model: LinearModel, ds: Dataset) -> float:
    pred = predict(model, ds.features, "mean")
    return float(np.mean((pred - np.asarray(ds.labels, dtype=float)) ** 2))


@dataclass(frozen=True)
class Method:
    """One learner in a comparison: a loss, how its error is scored, and the
    solver settings. The tuned lambda enters as the squared-l2 weight."""

    name: str
    loss: LossSpec
    metric: str = "label"  # label | expected | sampled | mse
    opts: FitOptions = field(default_factory=FitOptions)
    standardize: bool = True
    intercept: bool = False

    def fit(self, ds: Dataset, lam: float):
        budget = UncertaintyBudget(lambda_sq=lam)
        model, _ = fit(ds, self.loss, budget, self.opts, self.intercept, self.standardize)
        return model

    def score(self, model, ds: Dataset, seed=None) -> float:
        if self.metric == "mse":
            return mse(model, ds)
        return error_rate(model, ds, self.metric, seed)

    def describe(self):
        return {
            "name": self.name,
            "loss": self.loss.kind,
            "metric": self.metric,
            "standardize": self.standardize,
            "intercept": self.intercept,
            "fit_options": self.opts.to_dict(),
        }


def default_methods(opts: FitOptions | None = None):
    """MEM (expected 0-1 error of the randomized rule), the hinge-loss SVM and
    logistic regression, all with squared-l2 regularization."""
    opts = opts or FitOptions()
    return [
        Method("mem", LossSpec.zero_one(), "expected", opts),
        Method("svm", LossSpec.hinge(), "label", opts),
        Method("logistic", LossSpec.log(), "label", opts),
    ]


METHOD_FACTORIES = {
    "mem": lambda opts: Method("mem", LossSpec.zero_one(), "expected", opts),
    "mem-label": lambda opts: Method("mem-label", LossSpec.zero_one(), "label", opts),
    "svm": lambda opts: Method("svm", LossSpec.hinge(), "label", opts),
    "logistic": lambda opts: Method("logistic", LossSpec.log(), "label", opts),
}


def _has_two_classes(ds: Dataset, rows):
    return not ds.is_classification or len(np.unique(ds.labels[rows])) >= 2


def _split_with_classes(ds: Dataset, fraction: float, seed, max_attempts: int = 100):
    """Seeded split whose training side holds at least two classes.

    Returns ``(train_rows, test_rows, resamples)``.
    """
    for attempt in range(max_attempts):
        spec_seed = seed if attempt == 0 else (seed, attempt)
        train, test = split_indices(ds.n, SplitSpec(fraction, spec_seed))
        if _has_two_classes(ds, train):
            return train, test, attempt
    raise ConfigurationError(f"no split with two training classes after {max_attempts} attempts")


def tune_lambda(train: Dataset, method: Method, grid=DEFAULT_LAMBDA_GRID, fraction: float = 0.7, seed=0) -> float:
    """Pick lambda by a single inner train/validation split.

    The smallest lambda wins ties; duplicate grid values are ignored.
    """
    values = sorted({float(v) for v in grid})
    if not values:
        raise ConfigurationError("lambda grid is empty")
    if len(values) == 1:
        return values[0]
    inner_train, inner_test, _ = _split_with_classes(train, fraction, seed)
    fit_ds, val_ds = train.subset(inner_train), train.subset(inner_test)
    best_lam, best_err = values[0], math.inf
    for lam in values:
        err = method.score(method.fit(fit_ds, lam), val_ds, seed)
        if err < best_err:
            best_lam, best_err = lam, err
    return best_lam


@dataclass(frozen=True)
class Protocol:
    runs: int = 50
    outer_train_fraction: float = 0.7
    tuning_fraction: float = 0.7
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    base_seed: int = 0

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigurationError("runs must be positive")
        for f in (self.outer_train_fraction, self.tuning_fraction):
            if not 0 < f < 1:
                raise ConfigurationError("fractions must lie in (0, 1)")
        if len(self.lambda_grid) == 0:
            raise ConfigurationError("lambda grid is empty")
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))

    def to_dict(self):
        return asdict(self)


@dataclass
class MethodResult:
    per_run: list[float]
    lambdas: list[float]

    @property
    def mean(self):
        return float(np.mean(self.per_run))

    @property
    def stderr(self):
        if len(self.per_run) < 2:
            return 0.0
        return float(np.std(self.per_run, ddof=1) / math.sqrt(len(self.per_run)))

    @property
    def lambda_histogram(self):
        return {repr(k): v for k, v in sorted(Counter(self.lambdas).items())}


@dataclass
class EvalReport:
    results: dict[str, MethodResult]
    methods: list[dict]
    protocol: dict
    resamples: int = 0
    notes: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0

    def summary(self):
        return {name: {"mean": r.mean, "stderr": r.stderr} for name, r in self.results.items()}

    def to_dict(self, include_timing: bool = True):
        out = {
            "schema": "minimaxent-eval-report",
            "schema_version": SCHEMA_VERSION,
            "protocol": self.protocol,
            "methods": self.methods,
            "resamples": self.resamples,
            "notes": self.notes,
            "results": {
                name: {
                    "mean": r.mean,
                    "stderr": r.stderr,
                    "per_run": r.per_run,
                    "lambdas": r.lambdas,
                    "lambda_histogram": r.lambda_histogram,
                }
                for name, r in self.results.items()
            },
        }
        if include_timing:
            out["wall_clock_seconds"] = self.wall_clock_seconds
        return out

    def to_json(self, include_timing: bool = True):
        return json.dumps(self.to_dict(include_timing), indent=2)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "run", "value", "lambda"])
        for name, r in self.results.items():
            for i, (v, lam) in enumerate(zip(r.per_run, r.lambdas)):
                w.writerow([name, i, repr(v), repr(lam)])
        return buf.getvalue()

    def to_text(self):
        lines = [f"{'method':<12} {'mean':>10} {'stderr':>10}  runs"]
        for name, r in self.results.items():
            lines.append(f"{name:<12} {r.mean:>10.4f} {r.stderr:>10.4f}  {len(r.per_run)}")
        return "\n".join(lines)


def monte_carlo_eval(ds: Dataset, methods, protocol: Protocol | None = None, notes=None) -> EvalReport:
    """Repeated random train/test evaluation with inner lambda tuning.

    Run r uses seed ``base_seed + r``: outer split, lambda tuned per method
    on an inner split of the outer training part, refit on the whole outer
    training part, score on the held-out part. All methods see the same
    splits.
    """
    protocol = protocol or Protocol()
    methods = list(methods)
    if not methods:
        raise ConfigurationError("no methods to evaluate")
    for m in methods:
        if m.loss.is_classification != ds.is_classification:
            raise ConfigurationError(f"method {m.name} does not fit this dataset")
    start = time.perf_counter()
    results = {m.name: MethodResult([], []) for m in methods}
    resamples = 0
    for r in range(protocol.runs):
        seed = protocol.base_seed + r
        train_rows, test_rows, extra = _split_with_classes(ds, protocol.outer_train_fraction, seed)
        resamples += extra
        train, test = ds.subset(train_rows), ds.subset(test_rows)
        for m in methods:
            lam = tune_lambda(train, m, protocol.lambda_grid, protocol.tuning_fraction, seed)
            model = m.fit(train, lam)
            results[m.name].per_run.append(m.score(model, test, seed))
            results[m.name].lambdas.append(lam)
    all_notes = {"svm_tie_rule": SVM_TIE_RULE}
    all_notes.update(notes or {})
    return EvalReport(
        results=results,
        methods=[m.describe() for m in methods],
        protocol=protocol.to_dict(),
        resamples=resamples,
        notes=all_notes,
        wall_clock_seconds=time.perf_counter() - start,
    )


def with_options(method: Method, **changes) -> Method:
    return replace(method, **changes)
