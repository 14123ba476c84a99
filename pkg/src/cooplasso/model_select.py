"""Model selection: degrees of freedom, AIC/BIC, k-fold cross-validation.

The analytic criteria plug an effective-degrees-of-freedom estimate into

    AIC(lam) = ||y - yhat(lam)||^2 / sigma^2 + 2 df(lam)
    BIC(lam) = ||y - yhat(lam)||^2 / sigma^2 + log(n) df(lam)

The cooperative estimator's df is computed against a ridge reference whose
per-orthant norms calibrate the shrinkage ratio of each group part; the
group estimator uses the classical OLS-referenced approximation; the lasso
df is the support size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import glm, solver
from .errors import FoldTooSmall, InputError, OlsUnavailable, SigmaRequired
from .groups import GroupPartition
from .penalty import PenaltySpec


@dataclass
class DivisionGuard:
    """Counts groups where a ridge orthant part vanished while the fitted
    part did not; the ratio is taken as 1 there to keep df finite."""

    count: int = 0


def ridge_reference(dataset, gamma: float = 0.0) -> np.ndarray:
    """Reference estimate for df calibration.

    ``gamma = 0`` gives OLS when ``X`` has full column rank and the
    minimum-norm (pseudo-inverse) solution otherwise; ``gamma > 0`` is the
    standard ridge solution.
    """
    X, y = dataset.X, dataset.y
    if gamma == 0.0:
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        return beta
    G = X.T @ X + gamma * np.eye(dataset.p)
    return np.linalg.solve(G, X.T @ y)


def ols_estimate(dataset) -> np.ndarray:
    """OLS solution; requires ``n >= p`` and full column rank."""
    X = dataset.X
    if X.shape[0] < X.shape[1] or np.linalg.matrix_rank(X) < X.shape[1]:
        raise OlsUnavailable(
            "OLS needs a full-column-rank design with n >= p; "
            "substitute a ridge reference"
        )
    beta, *_ = np.linalg.lstsq(X, dataset.y, rcond=None)
    return beta


def df_lasso(beta: np.ndarray) -> float:
    """Support size."""
    return float(np.count_nonzero(np.asarray(beta)))


def df_group(
    beta_group: np.ndarray, beta_ols: np.ndarray, partition: GroupPartition
) -> float:
    """OLS-referenced df of a group-penalized fit.

    Each active group contributes ``1 + (p_k - 1) * ||b_Gk|| / ||ols_Gk||``;
    the ratio is clamped to [0, 1], which never binds in the orthonormal
    setting where the estimate is unbiased.
    """
    if beta_ols is None:
        raise OlsUnavailable("df_group needs an OLS (or substitute) reference")
    beta_group = np.asarray(beta_group, dtype=float)
    beta_ols = np.asarray(beta_ols, dtype=float)
    df = 0.0
    for idx in partition.groups:
        b = beta_group[idx]
        nrm = np.linalg.norm(b)
        if nrm == 0.0:
            continue
        ref = np.linalg.norm(beta_ols[idx])
        ratio = 1.0 if ref == 0.0 else min(1.0, nrm / ref)
        df += 1.0 + (idx.size - 1) * ratio
    return df


def df_coop(
    beta_coop: np.ndarray,
    beta_ridge: np.ndarray,
    gamma: float,
    partition: GroupPartition,
    guard: DivisionGuard | None = None,
) -> float:
    """Ridge-referenced df of a cooperative fit.

    Each active orthant part of a group contributes
    ``1 + (m - 1)/(1+gamma) * ||part|| / ||ridge part||`` where ``m`` counts
    the matching-sign entries of the ridge reference.  When the ridge part
    vanishes while the fitted part does not, the ratio term is taken as 1
    and the guard counter incremented.
    """
    beta_coop = np.asarray(beta_coop, dtype=float)
    beta_ridge = np.asarray(beta_ridge, dtype=float)
    df = 0.0
    for idx in partition.groups:
        b = beta_coop[idx]
        r = beta_ridge[idx]
        contribution = 0.0
        for sign in (1.0, -1.0):
            part = b[sign * b > 0]
            if part.size == 0:
                continue
            ridge_part = r[sign * r > 0]
            m = ridge_part.size
            if m == 0:
                if guard is not None:
                    guard.count += 1
                contribution += 1.0
                continue
            ratio = np.linalg.norm(part) / (
                (1.0 + gamma) * np.linalg.norm(ridge_part)
            )
            contribution += 1.0 + (m - 1) * min(1.0, ratio)
        # the two orthant terms cannot legitimately count more than the
        # group size; guard cases could otherwise overshoot it
        df += min(contribution, float(idx.size))
    return df


@dataclass
class SelectionReport:
    """Per-penalty scores and the indices chosen by each rule.

    ``chosen`` maps rule names (``"aic"``, ``"bic"``, ``"cv_min"``,
    ``"cv_1se"``) to grid indices.  ``sigma2_source`` is ``"given"`` or
    ``"estimated"``.
    """

    lambdas: np.ndarray
    df: np.ndarray | None = None
    aic: np.ndarray | None = None
    bic: np.ndarray | None = None
    cv_mean: np.ndarray | None = None
    cv_se: np.ndarray | None = None
    chosen: dict = field(default_factory=dict)
    sigma2_used: float | None = None
    sigma2_source: str | None = None
    division_guard_events: int = 0
    cv_metric: str | None = None

    def chosen_lambda(self, rule: str) -> float:
        return float(self.lambdas[self.chosen[rule]])

    def to_rows(self):
        cols = ["lambda", "df", "aic", "bic", "cv_mean", "cv_se"]
        rows = [cols]
        for i, lam in enumerate(self.lambdas):
            row = [lam]
            for arr in (self.df, self.aic, self.bic, self.cv_mean, self.cv_se):
                row.append(None if arr is None else float(arr[i]))
            rows.append(row)
        return rows

    def to_json(self) -> str:
        payload = {
            "lambdas": self.lambdas.tolist(),
            "chosen": {k: int(v) for k, v in self.chosen.items()},
            "chosen_lambda": {
                k: float(self.lambdas[v]) for k, v in self.chosen.items()
            },
            "sigma2_used": self.sigma2_used,
            "sigma2_source": self.sigma2_source,
            "division_guard_events": self.division_guard_events,
            "cv_metric": self.cv_metric,
        }
        for name in ("df", "aic", "bic", "cv_mean", "cv_se"):
            arr = getattr(self, name)
            payload[name] = None if arr is None else np.asarray(arr).tolist()
        return json.dumps(payload, indent=2)


def estimate_sigma2(dataset) -> float:
    """Residual variance of the OLS reference with a df-corrected
    denominator; defined only for ``n > p``."""
    n, p = dataset.n, dataset.p
    if n <= p:
        raise SigmaRequired(
            "sigma^2 cannot be estimated when n <= p; pass it explicitly"
        )
    beta = ols_estimate(dataset)
    resid = dataset.y - dataset.X @ beta
    return float(resid @ resid) / (n - p)


def path_df(path: solver.PathResult, dataset, gamma: float | None = None):
    """Degrees of freedom of every fit on a path, per its family's rule."""
    family = path.spec.family
    part = path.spec.partition
    guard = DivisionGuard()
    if family == "lasso":
        return np.array([df_lasso(f.beta) for f in path.fits]), guard
    if family == "sgl":
        raise InputError(
            "no analytic degrees of freedom for the sparse group penalty; "
            "use cross_validate"
        )
    if gamma is None:
        gamma = 0.0
    if family == "group":
        try:
            ref = ols_estimate(dataset)
        except OlsUnavailable:
            ref = ridge_reference(dataset, gamma)
        dfs = np.array([df_group(f.beta, ref, part) for f in path.fits])
        return dfs, guard
    ref = ridge_reference(dataset, gamma)
    dfs = np.array(
        [df_coop(f.beta, ref, gamma, part, guard) for f in path.fits]
    )
    return dfs, guard


def information_criteria(
    path: solver.PathResult,
    dataset,
    sigma2: float | None = None,
    gamma: float | None = None,
) -> SelectionReport:
    """AIC and BIC along a linear-model path.

    ``sigma2`` is used as given when supplied; otherwise it is estimated
    from the OLS residuals (requires ``n > p``).
    """
    if dataset.loss.kind != "squared":
        raise InputError("information criteria are defined for the linear model")
    if sigma2 is None:
        sigma2 = estimate_sigma2(dataset)
        source = "estimated"
    else:
        if sigma2 <= 0:
            raise InputError("sigma2 must be positive")
        source = "given"
    dfs, guard = path_df(path, dataset, gamma)
    for f, d in zip(path.fits, dfs):
        f.df = float(d)
    n = dataset.n
    rss = np.array(
        [float(np.sum((dataset.y - dataset.X @ f.beta) ** 2)) for f in path.fits]
    )
    aic = rss / sigma2 + 2.0 * dfs
    bic = rss / sigma2 + np.log(n) * dfs
    report = SelectionReport(
        lambdas=np.asarray(path.lambdas, dtype=float),
        df=dfs,
        aic=aic,
        bic=bic,
        sigma2_used=float(sigma2),
        sigma2_source=source,
        division_guard_events=guard.count,
    )
    report.chosen["aic"] = int(np.argmin(aic))
    report.chosen["bic"] = int(np.argmin(bic))
    return report


# -- cross-validation ---------------------------------------------------------

def fold_assignments(
    n: int, k: int, seed: int, strata: np.ndarray | None = None
) -> np.ndarray:
    """Deterministic fold labels in ``{0, ..., k-1}``; stratified when
    ``strata`` is given (labels balanced within each stratum)."""
    if k < 2:
        raise FoldTooSmall("need at least 2 folds")
    if k > n:
        raise FoldTooSmall(f"cannot split {n} observations into {k} folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=int)
    if strata is None:
        order = rng.permutation(n)
        folds[order] = np.arange(n) % k
    else:
        strata = np.asarray(strata)
        for value in np.unique(strata):
            rows = np.flatnonzero(strata == value)
            order = rng.permutation(rows)
            folds[order] = np.arange(rows.size) % k
    return folds


def _holdout_loss(train_ds, test_X, test_y, beta, intercept, metric):
    pred_ctx = train_ds
    yhat = glm.predict(pred_ctx, beta, intercept, X_new=test_X)
    if metric == "mse":
        return float(np.mean((test_y - yhat) ** 2))
    if metric == "deviance":
        p = np.clip(yhat, 1e-12, 1 - 1e-12)
        return float(
            -2.0 * np.mean(test_y * np.log(p) + (1 - test_y) * np.log(1 - p))
        )
    if metric == "misclass":
        return float(np.mean((yhat > 0.5) != (test_y > 0.5)))
    raise InputError(f"unknown CV metric {metric!r}")


def _cv_one_fold(args):
    (raw_X, raw_y, folds, fold, loss, standardize, spec, lambdas, metric,
     tol) = args
    train = folds != fold
    test = ~train
    ds = glm.prepare(raw_X[train], raw_y[train], loss, standardize)
    res = solver.path(ds, spec, lambdas=lambdas, tol=tol, loss=loss)
    return [
        _holdout_loss(ds, raw_X[test], raw_y[test], f.beta, f.intercept, metric)
        for f in res.fits
    ]


def cross_validate(
    dataset,
    spec: PenaltySpec,
    loss: glm.LossSpec | None = None,
    lambdas: np.ndarray | None = None,
    k: int = 5,
    metric: str | None = None,
    seed: int = 0,
    tol: float = 1e-6,
    jobs: int = 1,
) -> SelectionReport:
    """K-fold cross-validation over a fixed penalty grid.

    Folds are a pure function of ``seed`` (stratified on the response for
    the logistic loss).  The report carries the per-grid-point mean and
    standard error of the held-out loss and two selections: the CV minimum
    and the one-standard-error rule, which keeps the most penalized model
    whose error is within one SE of the minimum.
    """
    loss = loss or dataset.loss
    if metric is None:
        metric = "mse" if loss.kind == "squared" else "deviance"
    if loss.kind == "squared" and metric != "mse":
        raise InputError("the squared loss supports only the mse CV metric")
    if lambdas is None:
        lambdas = solver.lambda_grid(dataset, spec, loss=loss)
    lambdas = np.asarray(lambdas, dtype=float)
    strata = dataset.y_raw if loss.kind == "logistic" else None
    folds = fold_assignments(dataset.n, k, seed, strata)
    args = [
        (dataset.X_raw, dataset.y_raw, folds, fold, loss, dataset.standardize,
         spec, lambdas, metric, tol)
        for fold in range(k)
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_fold = list(pool.map(_cv_one_fold, args))
    else:
        per_fold = [_cv_one_fold(a) for a in args]
    scores = np.asarray(per_fold)  # (k, n_lambda), reduced by fold index
    cv_mean = scores.mean(axis=0)
    cv_se = scores.std(axis=0, ddof=1) / np.sqrt(k)
    i_min = int(np.argmin(cv_mean))
    threshold = cv_mean[i_min] + cv_se[i_min]
    within = np.flatnonzero(cv_mean <= threshold)
    i_1se = int(within.min())  # grid is decreasing: smallest index = largest lam
    report = SelectionReport(
        lambdas=lambdas, cv_mean=cv_mean, cv_se=cv_se, cv_metric=metric
    )
    report.chosen["cv_min"] = i_min
    report.chosen["cv_1se"] = i_1se
    return report
