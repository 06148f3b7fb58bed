"""Run the Monte Carlo protocol on every CSV in a directory.

Each file needs a header and a label column (``--label``, default ``y``).
A summary table goes to stdout; per-dataset JSON reports go to ``--out-dir``.

Example:
    python3 scripts/run_csv_benchmark.py data/ --runs 50 --out-dir reports/
"""

import argparse
from pathlib import Path

from minimaxent.data import load_csv
from minimaxent.evaluation import METHOD_FACTORIES, Protocol, monte_carlo_eval
from minimaxent.solve import FitOptions


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("directory", type=Path)
    p.add_argument("--label", default="y")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--methods", default="mem,svm,logistic")
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path, default=None)
    args = p.parse_args(argv)

    names = [m.strip() for m in args.methods.split(",")]
    opts = FitOptions(max_iters=args.iters)
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
    print(f"{'dataset':<24}" + "".join(f"{m:>18}" for m in names))
    for path in sorted(args.directory.glob("*.csv")):
        ds = load_csv(path, args.label, task="classification")
        methods = [METHOD_FACTORIES[m](opts) for m in names]
        report = monte_carlo_eval(ds, methods, Protocol(runs=args.runs, base_seed=args.seed),
                                  {"dataset": path.name, "seed": args.seed})
        cells = "".join(f"{100 * r.mean:>10.1f} +- {100 * r.stderr:<4.1f}" for r in report.results.values())
        print(f"{path.stem:<24}{cells}")
        if args.out_dir is not None:
            (args.out_dir / f"{path.stem}.json").write_text(report.to_json() + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
