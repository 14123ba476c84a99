"""Synthetic wave benchmark: data generation, metrics, replicated runs.

The generator builds group-structured coefficients from a quadratic wave
pattern, draws predictors from an AR(1) Gaussian, scales the signal to a
target population R-squared, and optionally flips a fraction of signs
together with the matching predictor columns (a perturbation that leaves
every sign-symmetric estimator distributionally untouched).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import glm, model_select, solver
from .errors import InputError
from .groups import GroupPartition, validate_partition
from .penalty import PenaltySpec


@dataclass(frozen=True)
class WaveScenario:
    """Configuration of one synthetic scenario.

    ``h`` in {3, 4, 5} sets the wave width, giving 5, 7 or 9 nonzero
    coefficients per active group of size 9.
    """

    n: int = 180
    p: int = 90
    n_groups: int = 10
    h: int = 5
    active_groups: int = 3
    rho: float = 0.4
    target_r2: float = 0.75
    sign_flip_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.p % self.n_groups:
            raise InputError("p must be a multiple of n_groups")
        if not 0.0 <= self.sign_flip_fraction <= 1.0:
            raise InputError("sign_flip_fraction must lie in [0, 1]")
        if not -1.0 < self.rho < 1.0:
            raise InputError("rho must lie in (-1, 1)")
        if not 0.0 < self.target_r2 < 1.0:
            raise InputError("target_r2 must lie in (0, 1)")

    @property
    def group_size(self) -> int:
        return self.p // self.n_groups

    def label(self) -> str:
        return (
            f"n={self.n},h={self.h},rho={self.rho:g},"
            f"active={self.active_groups},flip={self.sign_flip_fraction:g}"
        )


def wave_pattern(h: int, size: int = 9) -> np.ndarray:
    """Quadratic wave ``((h - |c - j|)_+)^2`` centered in the group,
    normalized to unit maximum."""
    j = np.arange(1, size + 1)
    center = (size + 1) // 2
    raw = np.maximum(h - np.abs(center - j), 0.0) ** 2
    peak = raw.max()
    return raw / peak if peak > 0 else raw


def scenario_partition(scenario: WaveScenario) -> GroupPartition:
    size = scenario.group_size
    groups = [
        list(range(k * size, (k + 1) * size)) for k in range(scenario.n_groups)
    ]
    return validate_partition(groups, p=scenario.p)


def ar1_sample(n: int, p: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` rows of an AR(1) Gaussian via the banded recursion."""
    z = rng.standard_normal((n, p))
    x = np.empty_like(z)
    x[:, 0] = z[:, 0]
    scale = np.sqrt(1.0 - rho**2)
    for j in range(1, p):
        x[:, j] = rho * x[:, j - 1] + scale * z[:, j]
    return x


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def generate(scenario: WaveScenario):
    """Build ``(dataset, beta_star)`` for one scenario draw.

    Distinct child seeds drive the group permutation, the predictors, the
    noise and the sign flips, so turning the flip fraction on or off leaves
    every other draw byte-identical.
    """
    ss = np.random.SeedSequence(scenario.seed)
    rng_perm, rng_x, rng_eps, rng_flip = (
        np.random.default_rng(s) for s in ss.spawn(4)
    )
    size = scenario.group_size
    wave = wave_pattern(scenario.h, size)
    beta = np.zeros(scenario.p)
    active = rng_perm.permutation(scenario.n_groups)[: scenario.active_groups]
    for k in active:
        beta[k * size : (k + 1) * size] = wave

    psi = ar1_covariance(scenario.p, scenario.rho)
    signal = float(beta @ psi @ beta)
    # population R^2 = s/(s+1) with unit noise variance
    target = scenario.target_r2 / (1.0 - scenario.target_r2)
    beta *= np.sqrt(target / signal)

    X = ar1_sample(scenario.n, scenario.p, scenario.rho, rng_x)
    eps = rng_eps.standard_normal(scenario.n)

    if scenario.sign_flip_fraction > 0:
        nz = np.flatnonzero(beta)
        n_flip = int(round(scenario.sign_flip_fraction * nz.size))
        flip = rng_flip.choice(nz, size=n_flip, replace=False)
        beta[flip] *= -1.0
        X[:, flip] *= -1.0

    y = X @ beta + eps
    return glm.prepare(X, y), beta


@dataclass
class MetricsRow:
    rmse: float
    sign_error_fraction: float
    support_recall: float
    support_precision: float
    method: str = ""
    scenario: str = ""


def evaluate(beta_hat: np.ndarray, beta_star: np.ndarray) -> MetricsRow:
    """Parameter RMSE, sign-error fraction and support recall/precision."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_star = np.asarray(beta_star, dtype=float)
    if beta_hat.shape != beta_star.shape:
        raise InputError("beta_hat and beta_star must have equal length")
    rmse = float(np.sqrt(np.mean((beta_hat - beta_star) ** 2)))
    sign_err = float(np.mean(np.sign(beta_hat) != np.sign(beta_star)))
    true_supp = beta_star != 0
    est_supp = beta_hat != 0
    hits = float(np.sum(true_supp & est_supp))
    recall = hits / true_supp.sum() if true_supp.any() else 1.0
    precision = hits / est_supp.sum() if est_supp.any() else 1.0
    return MetricsRow(rmse, sign_err, recall, precision)


METHODS = ("lasso", "group", "coop", "sgl-cv", "sgl-1se")


def _select_beta(method, dataset, partition, n_lambda, ratio, tol, sigma2, cv_seed):
    family = {"sgl-cv": "sgl", "sgl-1se": "sgl"}.get(method, method)
    spec = PenaltySpec(family, partition)
    res = solver.path(
        dataset, spec, n_lambda=n_lambda, lambda_min_ratio=ratio, tol=tol
    )
    if family == "sgl":
        report = model_select.cross_validate(
            dataset, spec, lambdas=res.lambdas, k=5, seed=cv_seed, tol=tol
        )
        rule = "cv_min" if method == "sgl-cv" else "cv_1se"
        idx = report.chosen[rule]
    else:
        report = model_select.information_criteria(res, dataset, sigma2=sigma2)
        idx = report.chosen["bic"]
    return res.fits[idx].beta


def _benchmark_one(args):
    scenario, methods, n_lambda, ratio, tol, sigma2, rep_seed = args
    sc = replace(scenario, seed=rep_seed)
    dataset, beta_star = generate(sc)
    out = {}
    for method in methods:
        beta = _select_beta(
            method, dataset, scenario_partition(sc), n_lambda, ratio, tol,
            sigma2, cv_seed=rep_seed,
        )
        out[method] = evaluate(beta, beta_star)
    return out


@dataclass
class BenchmarkRow:
    scenario: str
    method: str
    replicates: int
    rmse_mean: float
    rmse_se: float
    sign_error_mean: float
    sign_error_se: float
    recall_mean: float
    precision_mean: float


def run_benchmark(
    scenarios,
    methods=METHODS,
    replicates: int = 100,
    seed: int = 0,
    n_lambda: int = 100,
    lambda_min_ratio: float | None = None,
    tol: float = 1e-6,
    sigma2: float = 1.0,
    jobs: int = 1,
):
    """Replicated benchmark over scenarios and estimation methods.

    Analytic-df methods are selected by BIC with the generator's unit noise
    variance; the sparse-group methods by 5-fold cross-validation (minimum
    or one-standard-error rule).  Returns one :class:`BenchmarkRow` per
    scenario and method with means and standard errors over replicates.
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise InputError(f"unknown methods: {sorted(unknown)}")
    rows = []
    for scenario in scenarios:
        rep_seeds = [
            int(s.generate_state(1)[0])
            for s in np.random.SeedSequence((seed, scenario.seed)).spawn(replicates)
        ]
        args = [
            (scenario, methods, n_lambda, lambda_min_ratio, tol, sigma2, rs)
            for rs in rep_seeds
        ]
        if jobs > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_benchmark_one, args))
        else:
            results = [_benchmark_one(a) for a in args]
        for method in methods:
            metrics = [res[method] for res in results]
            rmse = np.array([m.rmse for m in metrics])
            serr = np.array([m.sign_error_fraction for m in metrics])
            rows.append(
                BenchmarkRow(
                    scenario=scenario.label(),
                    method=method,
                    replicates=replicates,
                    rmse_mean=float(rmse.mean()),
                    rmse_se=float(rmse.std(ddof=1) / np.sqrt(len(rmse))),
                    sign_error_mean=float(serr.mean()),
                    sign_error_se=float(serr.std(ddof=1) / np.sqrt(len(serr))),
                    recall_mean=float(np.mean([m.support_recall for m in metrics])),
                    precision_mean=float(
                        np.mean([m.support_precision for m in metrics])
                    ),
                )
            )
    return rows


def write_benchmark_csv(rows, path):
    """One line per scenario/method/metric with mean and standard error."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "method", "metric", "mean", "se", "replicates"])
        for row in rows:
            for metric, mean, se in (
                ("rmse", row.rmse_mean, row.rmse_se),
                ("sign_error", row.sign_error_mean, row.sign_error_se),
                ("support_recall", row.recall_mean, ""),
                ("support_precision", row.precision_mean, ""),
            ):
                writer.writerow(
                    [
                        row.scenario,
                        row.method,
                        metric,
                        f"{mean:.12g}",
                        f"{se:.12g}" if se != "" else "",
                        row.replicates,
                    ]
                )
