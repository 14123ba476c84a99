"""Smooth losses and data preparation for linear and logistic models.

The same fitting machinery handles both models; only the objective and its
gradient differ.  The squared loss works on centered data (columns and
response), which removes the intercept from the problem.  The logistic
loss keeps the 0/1 response and fits an unpenalized intercept.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NonBinaryResponse, NonFiniteLoss

# linear predictors are clamped here before exponentiation; the induced
# probability error is below 1e-13
ETA_CLAMP = 30.0


@dataclass(frozen=True)
class LossSpec:
    """Loss selector: ``kind`` is ``"squared"`` or ``"logistic"``.

    The intercept is never penalized; for the squared loss it is eliminated
    by centering, for the logistic loss it is fitted explicitly.
    """

    kind: str = "squared"

    def __post_init__(self):
        if self.kind not in ("squared", "logistic"):
            raise InputError(f"unknown loss kind {self.kind!r}")

    @property
    def includes_intercept(self) -> bool:
        return self.kind == "logistic"


SQUARED = LossSpec("squared")
LOGISTIC = LossSpec("logistic")


@dataclass
class Dataset:
    """Prepared design matrix and response with centering metadata.

    ``X`` and ``y`` are the working (centered / scaled) arrays handed to the
    solver.  ``X_raw``/``y_raw`` keep the originals so cross-validation can
    re-prepare folds with the same recipe.
    """

    X: np.ndarray
    y: np.ndarray
    loss: LossSpec
    column_means: np.ndarray
    y_mean: float
    scales: np.ndarray | None = None
    standardize: str | None = None
    X_raw: np.ndarray = field(default=None, repr=False)
    y_raw: np.ndarray = field(default=None, repr=False)
    constant_columns: np.ndarray = field(default=None, repr=False)
    _gram: np.ndarray = field(default=None, repr=False)
    _xty: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def gram(self) -> np.ndarray:
        if self._gram is None:
            self._gram = self.X.T @ self.X
        return self._gram

    def xty(self) -> np.ndarray:
        if self._xty is None:
            self._xty = self.X.T @ self.y
        return self._xty


def prepare(
    X,
    y,
    loss: LossSpec = SQUARED,
    standardize: str | None = None,
) -> Dataset:
    """Center (and optionally scale) raw data for fitting.

    Squared loss: columns of ``X`` and ``y`` are centered and the means
    recorded.  Logistic loss: columns are centered, ``y`` must be 0/1 and is
    kept as is.

    ``standardize`` may be ``None``, ``"std"`` (unit column variance) or,
    for the logistic loss only, ``"within-class"`` (unit pooled within-class
    variance, computed from the training labels).

    Columns that become identically zero after centering are recorded in
    ``constant_columns`` and flagged with a warning.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise InputError("X must be a 2-D array")
    n, p = X.shape
    if y.shape[0] != n:
        raise InputError(f"X has {n} rows but y has {y.shape[0]} entries")
    if n < 1:
        raise InputError("need at least one observation")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise InputError("X and y must be finite (no missing values)")

    col_means = X.mean(axis=0)
    Xc = X - col_means
    if loss.kind == "squared":
        y_mean = float(y.mean())
        yc = y - y_mean
    else:
        vals = np.unique(y)
        if not np.all(np.isin(vals, (0.0, 1.0))):
            raise NonBinaryResponse(
                f"logistic response must take values in {{0, 1}}, saw {vals[:5]}"
            )
        y_mean = float(y.mean())
        yc = y.copy()

    scales = None
    if standardize == "std":
        scales = Xc.std(axis=0)
        scales[scales == 0] = 1.0
        Xc = Xc / scales
    elif standardize == "within-class":
        if loss.kind != "logistic":
            raise InputError("within-class scaling requires the logistic loss")
        if np.unique(y).size < 2:
            raise NonBinaryResponse("within-class scaling needs both classes")
        pooled = np.zeros(p)
        for cls in (0.0, 1.0):
            rows = y == cls
            frac = rows.mean()
            pooled += frac * Xc[rows].var(axis=0)
        scales = np.sqrt(pooled)
        scales[scales == 0] = 1.0
        Xc = Xc / scales
    elif standardize is not None:
        raise InputError(f"unknown standardization {standardize!r}")

    const = np.flatnonzero(np.all(X == X[0, :], axis=0))
    if const.size:
        Xc[:, const] = 0.0
        warnings.warn(
            f"{const.size} column(s) are constant and were centered to zero: "
            f"{const[:10].tolist()}",
            stacklevel=2,
        )
    return Dataset(
        X=Xc,
        y=yc,
        loss=loss,
        column_means=col_means,
        y_mean=y_mean,
        scales=scales,
        standardize=standardize,
        X_raw=X,
        y_raw=y,
        constant_columns=const,
    )


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
    return 1.0 / (1.0 + np.exp(-eta))


def loss_and_gradient(
    dataset: Dataset,
    loss: LossSpec,
    beta: np.ndarray,
    intercept: float = 0.0,
):
    """Objective value, coefficient gradient and intercept gradient.

    Squared: ``0.5 * ||y - X beta||^2`` (the intercept argument is ignored;
    it is zero on centered data).  Logistic: the exact negative
    log-likelihood of the 0/1 response at ``X beta + intercept``.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (dataset.p,):
        raise InputError(f"beta must have length {dataset.p}")
    if loss.kind == "squared":
        resid = dataset.X @ beta - dataset.y
        value = 0.5 * float(resid @ resid)
        grad = dataset.X.T @ resid
        if not np.isfinite(value):
            raise NonFiniteLoss("squared loss overflowed")
        return value, grad, 0.0
    eta = np.clip(dataset.X @ beta + intercept, -ETA_CLAMP, ETA_CLAMP)
    # log(1 + exp(eta)) - y*eta, computed stably
    value = float(np.sum(np.logaddexp(0.0, eta) - dataset.y * eta))
    prob = _sigmoid(eta)
    resid = prob - dataset.y
    grad = dataset.X.T @ resid
    i_grad = float(np.sum(resid))
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NonFiniteLoss("logistic loss overflowed")
    return value, grad, i_grad


def null_intercept(dataset: Dataset, loss: LossSpec) -> float:
    """Optimal unpenalized intercept at ``beta = 0``."""
    if loss.kind == "squared":
        return 0.0
    ybar = float(dataset.y.mean())
    if ybar <= 0.0 or ybar >= 1.0:
        raise NonBinaryResponse("logistic response contains a single class")
    return float(np.log(ybar / (1.0 - ybar)))


def score_at_null(dataset: Dataset, loss: LossSpec | None = None) -> np.ndarray:
    """Negated smooth-loss gradient at ``beta = 0`` (intercept profiled out).

    This is the quantity thresholded by the penalty at the start of the
    path: ``X^T y`` for the centered squared loss, ``X^T (y - ybar)`` for
    the logistic loss with intercept at its null optimum.
    """
    loss = loss or dataset.loss
    if loss.kind == "squared":
        return dataset.xty()
    b0 = null_intercept(dataset, loss)
    _, grad, _ = loss_and_gradient(dataset, loss, np.zeros(dataset.p), b0)
    return -grad


def predict(
    dataset: Dataset,
    beta: np.ndarray,
    intercept: float = 0.0,
    X_new=None,
):
    """Predictions on the raw scale.

    For the squared loss the centering is undone so predictions match a fit
    with an explicit intercept on uncentered data.  For the logistic loss
    the returned values are probabilities.
    """
    X_new = dataset.X_raw if X_new is None else np.asarray(X_new, dtype=float)
    Xc = X_new - dataset.column_means
    if dataset.scales is not None:
        Xc = Xc / dataset.scales
    eta = Xc @ beta
    if dataset.loss.kind == "squared":
        return eta + dataset.y_mean
    return _sigmoid(eta + intercept)


# -- CSV ingestion -----------------------------------------------------------

def read_csv_columns(path):
    """Read an RFC-4180-style CSV with a header row.

    Returns ``(header, columns)`` where ``columns`` maps each name to a list
    of raw string values in file order.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        cols = {name: [] for name in header}
        if len(cols) != len(header):
            raise InputError(f"{path}: duplicate column names in header")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            for name, val in zip(header, row):
                cols[name].append(val)
    return header, cols


def numeric_column(name, values):
    try:
        return np.array([float(v) for v in values])
    except ValueError as exc:
        raise InputError(f"column {name!r} is not numeric: {exc}") from exc
