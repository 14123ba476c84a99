"""Closed-form estimators under an orthonormal design.

When ``X^T X = I`` every family shrinks the OLS estimate in closed form,
which makes these functions exact oracles for the iterative solver and the
building blocks of the degrees-of-freedom estimates.  They act directly on
an OLS coefficient vector; how it was produced is the caller's business.
"""

from __future__ import annotations

import numpy as np

from .groups import GroupPartition, phi
from .penalty import group_shrink, soft_threshold


def lasso_closed_form(beta_ols: np.ndarray, lam: float) -> np.ndarray:
    """Soft threshold: ``(1 - lam/|b_j|)_+ b_j``."""
    return soft_threshold(np.asarray(beta_ols, dtype=float), lam)


def group_closed_form(
    beta_ols: np.ndarray, lam: float, partition: GroupPartition
) -> np.ndarray:
    """Per-group Euclidean shrink ``(1 - lam*w_k/||b_Gk||)_+ b_Gk``."""
    beta_ols = np.asarray(beta_ols, dtype=float)
    out = np.empty_like(beta_ols)
    for idx, w in zip(partition.groups, partition.weights):
        out[idx] = group_shrink(beta_ols[idx], lam * w)
    return out


def coop_closed_form(
    beta_ols: np.ndarray, lam: float, partition: GroupPartition
) -> np.ndarray:
    """Orthant-separate group shrink.

    Each coefficient is scaled by ``(1 - lam*w_k/||phi_j(b_Gk)||)_+`` where
    ``phi_j`` picks the part of the group sharing the coefficient's sign, so
    the positive and negative parts of a group are shrunk independently and
    signs are never flipped.
    """
    beta_ols = np.asarray(beta_ols, dtype=float)
    out = np.zeros_like(beta_ols)
    for idx, w in zip(partition.groups, partition.weights):
        b = beta_ols[idx]
        res = np.zeros_like(b)
        for side in (b > 0, b < 0):
            if side.any():
                nrm = np.linalg.norm(b[side])
                factor = max(0.0, 1.0 - lam * w / nrm)
                res[side] = factor * b[side]
        out[idx] = res
    return out


def sgl_closed_form(
    beta_ols: np.ndarray, lam: float, alpha: float, partition: GroupPartition
) -> np.ndarray:
    """Chain of two shrinks: soft threshold at ``lam*alpha``, then group
    shrink at ``lam*(1-alpha)*w_k``.  ``alpha=1`` is the lasso, ``alpha=0``
    the group form."""
    mid = soft_threshold(np.asarray(beta_ols, dtype=float), lam * alpha)
    out = np.empty_like(mid)
    for idx, w in zip(partition.groups, partition.weights):
        out[idx] = group_shrink(mid[idx], lam * (1.0 - alpha) * w)
    return out


def closed_form(family, beta_ols, lam, partition, alpha=0.5):
    if family == "lasso":
        return lasso_closed_form(beta_ols, lam)
    if family == "group":
        return group_closed_form(beta_ols, lam, partition)
    if family == "coop":
        return coop_closed_form(beta_ols, lam, partition)
    if family == "sgl":
        return sgl_closed_form(beta_ols, lam, alpha, partition)
    raise ValueError(f"unknown family {family!r}")


def translation_coop(beta_ols: np.ndarray, lam: float, partition: GroupPartition):
    """Per-coefficient identity ``||phi_j(shrunk)|| = (||phi_j(ols)|| - lam*w)_+``.

    Returns the two sides for every coefficient, mainly for verification.
    """
    beta_ols = np.asarray(beta_ols, dtype=float)
    shrunk = coop_closed_form(beta_ols, lam, partition)
    lhs = np.zeros_like(beta_ols)
    rhs = np.zeros_like(beta_ols)
    for idx, w in zip(partition.groups, partition.weights):
        for loc, j in enumerate(idx):
            lhs[j] = np.linalg.norm(phi(shrunk[idx], loc))
            rhs[j] = max(0.0, np.linalg.norm(phi(beta_ols[idx], loc)) - lam * w)
    return lhs, rhs


def shrinkage_surface(
    family: str,
    lam: float,
    grid: np.ndarray,
    alpha: float = 0.5,
    weight: float = 1.0,
):
    """First coefficient of a two-element group over a grid of OLS pairs.

    Returns ``(b1, b2, value)`` rows for every grid point, the raw material
    for shrinkage-surface plots.
    """
    from .groups import validate_partition

    part = validate_partition([[0, 1]], weights=[weight], p=2)
    rows = []
    for b1 in grid:
        for b2 in grid:
            est = closed_form(family, np.array([b1, b2]), lam, part, alpha)
            rows.append((float(b1), float(b2), float(est[0])))
    return rows
