"""Command-line interface.

Subcommands: ``fit`` (CSV in, coefficient path and selection summary out),
``simulate`` (replicated synthetic benchmark), ``diagnose`` (recovery
conditions and empirical recovery for a population spec), ``shrinkmap``
(shrinkage surfaces of the closed-form estimators).

Exit codes: 0 success, 2 input or validation error, 3 numerical failure.
Every subcommand is deterministic given its inputs and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import diagnostics, encoding, glm, model_select, ortho, simulate, solver
from .errors import InputError, NumericalError
from .groups import read_group_file, singleton_partition, validate_partition
from .penalty import PenaltySpec

FLOAT_FMT = "%.12g"


def _fmt(x) -> str:
    return FLOAT_FMT % float(x)


def default_jobs() -> int:
    env = os.environ.get("COOPLASSO_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"COOPLASSO_JOBS={env!r} is not an integer") from None
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cooplasso",
        description="Sign-coherent group-sparse regression and companions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a regularization path from CSV data")
    p_fit.add_argument("--data", required=True, help="CSV file with a header row")
    p_fit.add_argument("--response", required=True, help="response column name")
    p_fit.add_argument("--groups", help="group file (1-based indices)")
    p_fit.add_argument("--ordinal", help="ordinal schema JSON")
    p_fit.add_argument(
        "--family", default="coop", choices=["lasso", "group", "sgl", "coop"]
    )
    p_fit.add_argument("--alpha", type=float, default=0.5)
    p_fit.add_argument("--loss", default="squared", choices=["squared", "logistic"])
    p_fit.add_argument(
        "--standardize", choices=["std", "within-class"], default=None
    )
    p_fit.add_argument("--n-lambda", type=int, default=100)
    p_fit.add_argument("--lambda-min-ratio", type=float, default=None)
    p_fit.add_argument(
        "--select", default="bic", choices=["aic", "bic", "cv", "cv1se", "none"]
    )
    p_fit.add_argument("--sigma2", type=float, default=None)
    p_fit.add_argument("--cv-folds", type=int, default=5)
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--tol", type=float, default=1e-6)
    p_fit.add_argument("--jobs", type=int, default=None)
    p_fit.add_argument("--out-prefix", required=True)
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="run the synthetic wave benchmark")
    p_sim.add_argument("--n", type=int, default=180)
    p_sim.add_argument("--wave-width", type=int, default=5, choices=[3, 4, 5])
    p_sim.add_argument("--rho", type=float, default=0.4)
    p_sim.add_argument("--active-groups", type=int, default=3)
    p_sim.add_argument("--p-sigma", type=float, default=0.0)
    p_sim.add_argument("--replicates", type=int, default=100)
    p_sim.add_argument(
        "--methods", default="lasso,group,coop",
        help="comma list from: " + ",".join(simulate.METHODS),
    )
    p_sim.add_argument("--n-lambda", type=int, default=100)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--jobs", type=int, default=None)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_diag = sub.add_parser(
        "diagnose", help="evaluate recovery conditions for a population spec"
    )
    p_diag.add_argument("--truth", required=True, help="population spec JSON")
    p_diag.add_argument("--recovery", action="store_true")
    p_diag.add_argument("--n", type=int, default=20)
    p_diag.add_argument("--sigma", type=float, default=0.1)
    p_diag.add_argument("--replicates", type=int, default=100)
    p_diag.add_argument("--seed", type=int, default=0)
    p_diag.add_argument("--jobs", type=int, default=None)
    p_diag.add_argument("--out", required=True)
    p_diag.set_defaults(func=cmd_diagnose)

    p_map = sub.add_parser(
        "shrinkmap", help="closed-form shrinkage surfaces on an OLS grid"
    )
    p_map.add_argument(
        "--family", default="coop", choices=["lasso", "group", "sgl", "coop"]
    )
    p_map.add_argument("--alpha", type=float, default=0.5)
    p_map.add_argument("--penalty", type=float, default=1.0)
    p_map.add_argument("--weight", type=float, default=1.0)
    p_map.add_argument("--grid-min", type=float, default=-3.0)
    p_map.add_argument("--grid-max", type=float, default=3.0)
    p_map.add_argument("--grid-points", type=int, default=61)
    p_map.add_argument("--out", required=True)
    p_map.set_defaults(func=cmd_shrinkmap)
    return parser


def _load_design(args):
    header, cols = glm.read_csv_columns(args.data)
    if args.response not in cols:
        raise InputError(f"response column {args.response!r} not in {args.data}")
    predictors = [name for name in header if name != args.response]
    y = glm.numeric_column(args.response, cols[args.response])

    if args.ordinal:
        if args.groups:
            raise InputError(
                "--groups cannot be combined with --ordinal; the schema "
                "already determines the group structure"
            )
        specs = {s.name: s for s in encoding.read_ordinal_schema(args.ordinal)}
        blocks, groups = [], []
        offset = 0
        for name in predictors:
            if name in specs:
                coded, local = encoding.encode(cols[name], specs[name])
                blocks.append(coded)
                groups.append((offset + local).tolist())
                offset += coded.shape[1]
            else:
                blocks.append(glm.numeric_column(name, cols[name])[:, None])
                groups.append([offset])
                offset += 1
        X = np.concatenate(blocks, axis=1)
        partition = validate_partition(groups, p=X.shape[1])
        colnames = []
        for name in predictors:
            if name in specs:
                lv = specs[name].levels
                colnames += [f"{name}:{lv[i]}>{lv[i - 1]}" for i in range(1, len(lv))]
            else:
                colnames.append(name)
        return X, y, partition, colnames

    X = np.column_stack([glm.numeric_column(n, cols[n]) for n in predictors])
    if args.groups:
        partition = read_group_file(args.groups, X.shape[1])
    else:
        partition = singleton_partition(X.shape[1])
    return X, y, partition, predictors


def cmd_fit(args) -> int:
    X, y, partition, colnames = _load_design(args)
    loss = glm.LossSpec(args.loss)
    dataset = glm.prepare(X, y, loss, args.standardize)
    spec = PenaltySpec(args.family, partition, args.alpha)
    res = solver.path(
        dataset, spec, n_lambda=args.n_lambda,
        lambda_min_ratio=args.lambda_min_ratio, tol=args.tol, loss=loss,
    )

    path_file = f"{args.out_prefix}_path.csv"
    with open(path_file, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda"] + [f"coef_{j + 1}" for j in range(dataset.p)])
        for lam, f in zip(res.lambdas, res.fits):
            writer.writerow([_fmt(lam)] + [_fmt(b) for b in f.beta])

    summary = {
        "n": dataset.n,
        "p": dataset.p,
        "family": args.family,
        "loss": args.loss,
        "columns": colnames,
        "lambdas": [float(v) for v in res.lambdas],
        "kkt_residuals": [f.kkt_residual for f in res.fits],
        "converged": all(f.converged for f in res.fits),
        "nonzeros": [int(np.count_nonzero(f.beta)) for f in res.fits],
    }
    selection = None
    if args.select in ("aic", "bic"):
        if loss.kind != "squared":
            raise InputError("aic/bic selection requires the squared loss")
        sigma2 = args.sigma2
        if sigma2 is None and dataset.n <= dataset.p:
            raise InputError(
                "aic/bic with n <= p needs an explicit --sigma2"
            )
        selection = model_select.information_criteria(res, dataset, sigma2=sigma2)
        chosen = selection.chosen[args.select]
    elif args.select in ("cv", "cv1se"):
        jobs = args.jobs if args.jobs is not None else default_jobs()
        selection = model_select.cross_validate(
            dataset, spec, loss, lambdas=res.lambdas, k=args.cv_folds,
            seed=args.seed, tol=args.tol, jobs=jobs,
        )
        chosen = selection.chosen["cv_min" if args.select == "cv" else "cv_1se"]
    else:
        chosen = None
    if selection is not None:
        summary["selection"] = json.loads(selection.to_json())
        summary["selected_index"] = chosen
        summary["selected_lambda"] = float(res.lambdas[chosen])
        summary["selected_beta"] = [float(b) for b in res.fits[chosen].beta]
        if selection.df is not None:
            summary["df"] = [float(d) for d in selection.df]

    with open(f"{args.out_prefix}_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    print(f"wrote {path_file} and {args.out_prefix}_summary.json")
    if not summary["converged"]:
        raise NumericalError("one or more path fits did not converge")
    return 0


def cmd_simulate(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    scenario = simulate.WaveScenario(
        n=args.n, h=args.wave_width, rho=args.rho,
        active_groups=args.active_groups,
        sign_flip_fraction=args.p_sigma, seed=args.seed,
    )
    jobs = args.jobs if args.jobs is not None else default_jobs()
    rows = simulate.run_benchmark(
        [scenario], methods=methods, replicates=args.replicates,
        seed=args.seed, n_lambda=args.n_lambda, jobs=jobs,
    )
    simulate.write_benchmark_csv(rows, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_diagnose(args) -> int:
    truth = diagnostics.TruthSpec.from_json(args.truth)
    report = diagnostics.check_assumptions(truth)
    payload = json.loads(report.to_json())
    if args.recovery:
        jobs = args.jobs if args.jobs is not None else default_jobs()
        rec = diagnostics.empirical_recovery(
            truth, n=args.n, sigma=args.sigma, replicates=args.replicates,
            seed=args.seed, jobs=jobs,
        )
        payload["recovery"] = json.loads(rec.to_json())
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    print(f"wrote {args.out}")
    return 0


def cmd_shrinkmap(args) -> int:
    grid = np.linspace(args.grid_min, args.grid_max, args.grid_points)
    rows = ortho.shrinkage_surface(
        args.family, args.penalty, grid, alpha=args.alpha, weight=args.weight
    )
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ols_1", "ols_2", "estimate_1"])
        for b1, b2, val in rows:
            writer.writerow([_fmt(b1), _fmt(b2), _fmt(val)])
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
