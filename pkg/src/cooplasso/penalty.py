"""Penalty norms, proximal operators, optimality checkers and grid anchors.

Four penalty families are supported:

``lasso``
    plain l1 norm (group weights ignored),
``group``
    sum of weighted Euclidean group norms,
``sgl``
    sparse group: ``alpha * l1 + (1 - alpha) * group``,
``coop``
    cooperative: the weighted group norm applied separately to the
    componentwise positive and negative parts of each group, which makes
    the penalty favor sign-coherent groups.

All operations are pure functions over immutable inputs.

Note on ``sgl``: the mixing convention is fixed by the closed-form chain
(soft-threshold at ``t * alpha``, then group-shrink at ``t * (1-alpha) * w_k``),
so ``alpha = 1`` is the lasso and ``alpha = 0`` the group penalty.  The norm
uses the matching convention so the prox is its exact minimizer for every
``alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InputError
from .groups import GroupPartition, negative_part, positive_part

FAMILIES = ("lasso", "group", "sgl", "coop")


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family selector bound to a group partition.

    ``alpha`` is the sparse-group mixing parameter in [0, 1]; it is ignored
    unless ``family == "sgl"``.
    """

    family: str
    partition: GroupPartition
    alpha: float = 0.5

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown penalty family {self.family!r}")
        if not (0.0 <= self.alpha <= 1.0):
            raise InputError(f"alpha must lie in [0, 1], got {self.alpha}")


def _check_len(v: np.ndarray, spec: PenaltySpec) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (spec.partition.p,):
        raise DimensionMismatch(
            f"expected vector of length {spec.partition.p}, got shape {v.shape}"
        )
    return v


def _group_norms(v: np.ndarray, part) -> np.ndarray:
    """Euclidean norm of ``v`` on each group (vectorized group reduction)."""
    vo = v[part.order]
    return np.sqrt(np.add.reduceat(vo * vo, part.offsets)) if vo.size else np.empty(0)


def _orthant_norms(v: np.ndarray, part):
    vo = v[part.order]
    pos = np.maximum(vo, 0.0)
    neg = np.maximum(-vo, 0.0)
    if vo.size == 0:
        return np.empty(0), np.empty(0)
    return (
        np.sqrt(np.add.reduceat(pos * pos, part.offsets)),
        np.sqrt(np.add.reduceat(neg * neg, part.offsets)),
    )


def norm_value(v: np.ndarray, spec: PenaltySpec) -> float:
    """Value of the selected penalty norm at ``v``."""
    v = _check_len(v, spec)
    part = spec.partition
    if spec.family == "lasso":
        return float(np.sum(np.abs(v)))
    if spec.family == "group":
        return float(part.weights @ _group_norms(v, part))
    if spec.family == "coop":
        pos, neg = _orthant_norms(v, part)
        return float(part.weights @ (pos + neg))
    # sgl
    return float(
        (1.0 - spec.alpha) * (part.weights @ _group_norms(v, part))
        + spec.alpha * np.sum(np.abs(v))
    )


# -- proximal operators ------------------------------------------------------

def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def group_shrink(v: np.ndarray, t: float) -> np.ndarray:
    """Euclidean shrinkage ``(1 - t/||v||)_+ v``."""
    nrm = np.linalg.norm(v)
    if nrm <= t:
        return np.zeros_like(v)
    return (1.0 - t / nrm) * v


def _coop_prox_group(g: np.ndarray, t_w: float) -> np.ndarray:
    """Shrink the positive and negative parts of one group separately."""
    out = np.zeros_like(g)
    pos = g > 0
    if pos.any():
        npos = np.linalg.norm(g[pos])
        if npos > t_w:
            out[pos] = (1.0 - t_w / npos) * g[pos]
    neg = g < 0
    if neg.any():
        nneg = np.linalg.norm(g[neg])
        if nneg > t_w:
            out[neg] = (1.0 - t_w / nneg) * g[neg]
    return out


def _group_shrink_all(v: np.ndarray, thresholds: np.ndarray, part) -> np.ndarray:
    """Per-group Euclidean shrink with one threshold per group."""
    norms = _group_norms(v, part)
    with np.errstate(divide="ignore", invalid="ignore"):
        factors = np.where(norms > thresholds, 1.0 - thresholds / norms, 0.0)
    out = np.empty_like(v)
    out[part.order] = v[part.order] * np.repeat(factors, part.size_arr)
    return out


def _coop_prox_all(v: np.ndarray, thresholds: np.ndarray, part) -> np.ndarray:
    """Orthant-separate group shrink, one threshold per group."""
    pos, neg = _orthant_norms(v, part)
    with np.errstate(divide="ignore", invalid="ignore"):
        fp = np.where(pos > thresholds, 1.0 - thresholds / pos, 0.0)
        fn = np.where(neg > thresholds, 1.0 - thresholds / neg, 0.0)
    vo = v[part.order]
    factor = np.where(
        vo > 0, np.repeat(fp, part.size_arr), np.repeat(fn, part.size_arr)
    )
    out = np.empty_like(v)
    out[part.order] = vo * factor
    return out


def prox(v: np.ndarray, t: float, spec: PenaltySpec) -> np.ndarray:
    """Exact minimizer of ``0.5 ||b - v||^2 + t * norm_value(b, spec)``.

    ``t`` must be nonnegative; ``t = 0`` returns ``v``.
    """
    v = _check_len(v, spec)
    if t < 0:
        raise InputError("prox step t must be nonnegative")
    if t == 0.0:
        return v.copy()
    part = spec.partition
    if spec.family == "lasso":
        return soft_threshold(v, t)
    if spec.family == "sgl":
        u = soft_threshold(v, t * spec.alpha)
        return _group_shrink_all(u, t * (1.0 - spec.alpha) * part.weights, part)
    if spec.family == "group":
        return _group_shrink_all(v, t * part.weights, part)
    return _coop_prox_all(v, t * part.weights, part)


def prox_sign_constrained(
    v: np.ndarray,
    t: float,
    spec: PenaltySpec,
    nonneg: np.ndarray,
    nonpos: np.ndarray,
) -> np.ndarray:
    """Prox of the penalty plus orthant constraints (coop and lasso only).

    ``nonneg``/``nonpos`` are boolean masks of coordinates constrained to
    ``>= 0`` / ``<= 0``.  Zeroing the infeasible directions of ``v`` first
    and then applying the unconstrained prox is exact for orthant-separable
    penalties, which covers coop and the l1 norm.
    """
    if spec.family not in ("coop", "lasso"):
        if nonneg.any() or nonpos.any():
            raise InputError(
                f"sign constraints are not supported for family {spec.family!r}"
            )
        return prox(v, t, spec)
    z = np.asarray(v, dtype=float).copy()
    z[nonneg & (z < 0)] = 0.0
    z[nonpos & (z > 0)] = 0.0
    return prox(z, t, spec)


# -- optimality conditions ---------------------------------------------------

@dataclass
class KktReport:
    """Violation scores of the first-order optimality conditions.

    ``per_group_scores[k] = (g_plus, g_minus)`` collects, per group, the
    evidence that the positive / negative orthant side of optimality is
    violated: stationarity residuals of active coefficients and threshold
    excesses of inactive ones.  Scores are normalized by
    ``max(1, lambda * w_k)`` so a single tolerance works across scales.
    ``max_violation`` is the maximum over all scores.
    """

    max_violation: float
    violating_group: int | None
    violating_orthant: str | None
    per_group_scores: np.ndarray

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_violation <= tol


def _finalize_report(scores: np.ndarray) -> KktReport:
    if scores.size == 0:
        return KktReport(0.0, None, None, scores)
    max_violation = float(scores.max())
    if max_violation <= 0.0:
        return KktReport(max_violation, None, None, scores)
    # ties: positive orthant first, then the lower group index
    best = None
    for k in range(scores.shape[0]):
        for col, orthant in ((0, "positive"), (1, "negative")):
            if scores[k, col] == max_violation:
                cand = (k, orthant)
                if best is None:
                    best = cand
                break
        if best is not None:
            break
    return KktReport(max_violation, best[0], best[1], scores)


def kkt_check(
    beta: np.ndarray, gradient: np.ndarray, lam: float, spec: PenaltySpec
) -> KktReport:
    """Score how far ``0`` is from the subdifferential of the penalized
    objective at ``beta``.

    ``gradient`` must be the smooth-loss gradient at ``beta``.  For each
    group the report records a pair of orthant scores; a stationary point
    of the penalized problem scores exactly zero everywhere.
    """
    beta = _check_len(beta, spec)
    gradient = _check_len(gradient, spec)
    part = spec.partition
    K = part.n_groups
    scores = np.zeros((K, 2))
    for k, (idx, w) in enumerate(zip(part.groups, part.weights)):
        b = beta[idx]
        g = gradient[idx]
        w_eff = 1.0 if spec.family == "lasso" else float(w)
        scale = max(1.0, lam * w_eff)
        gp, gn = _group_scores(b, g, lam, w_eff, spec)
        scores[k, 0] = gp / scale
        scores[k, 1] = gn / scale
    return _finalize_report(scores)


# alias matching the question the checker answers
subdifferential_contains_zero = kkt_check


def _fold(value: float, into: float) -> float:
    return value if value > into else into


def _group_scores(b, g, lam, w, spec):
    """Raw (positive, negative) orthant violation scores for one group."""
    if spec.family == "lasso":
        return _lasso_scores(b, g, lam)
    if spec.family == "group":
        return _group_lasso_scores(b, g, lam, w)
    if spec.family == "sgl":
        return _sgl_scores(b, g, lam, w, spec.alpha)
    return _coop_scores(b, g, lam, w)


def _coop_scores(b, g, lam, w):
    gp = gn = 0.0
    pos = b > 0
    neg = b < 0
    zero = ~pos & ~neg
    if pos.any():
        r = g[pos] + lam * w * b[pos] / np.linalg.norm(b[pos])
        gp = _fold(float(np.abs(r).max()), gp)
    if neg.any():
        r = g[neg] + lam * w * b[neg] / np.linalg.norm(b[neg])
        gn = _fold(float(np.abs(r).max()), gn)
    if zero.any():
        gz = g[zero]
        # orthant part of the full group gradient, as seen from a zero coord
        if np.any(gz < 0):
            excess = np.linalg.norm(negative_part(g)) - lam * w
            gp = _fold(max(0.0, float(excess)), gp)
        if np.any(gz > 0):
            excess = np.linalg.norm(positive_part(g)) - lam * w
            gn = _fold(max(0.0, float(excess)), gn)
    return gp, gn


def _lasso_scores(b, g, lam):
    gp = gn = 0.0
    for bj, gj in zip(b, g):
        if bj > 0:
            gp = _fold(abs(gj + lam), gp)
        elif bj < 0:
            gn = _fold(abs(gj - lam), gn)
        else:
            excess = max(0.0, abs(gj) - lam)
            if gj < 0:
                gp = _fold(excess, gp)
            elif gj > 0:
                gn = _fold(excess, gn)
    return gp, gn


def _group_lasso_scores(b, g, lam, w):
    gp = gn = 0.0
    nrm = np.linalg.norm(b)
    if nrm > 0:
        # an active group is smooth in every coordinate, zero ones included
        r = g + lam * w * b / nrm
        for bj, gj, rj in zip(b, g, r):
            if bj > 0 or (bj == 0 and gj < 0):
                gp = _fold(abs(rj), gp)
            elif bj < 0 or (bj == 0 and gj > 0):
                gn = _fold(abs(rj), gn)
    else:
        excess = max(0.0, float(np.linalg.norm(g)) - lam * w)
        if excess > 0:
            if np.linalg.norm(negative_part(g)) >= np.linalg.norm(positive_part(g)):
                gp = excess
            else:
                gn = excess
    return gp, gn


def _sgl_scores(b, g, lam, w, alpha):
    gp = gn = 0.0
    nrm = np.linalg.norm(b)
    if nrm > 0:
        for bj, gj in zip(b, g):
            if bj != 0:
                r = gj + lam * (1 - alpha) * w * bj / nrm + lam * alpha * np.sign(bj)
                if bj > 0:
                    gp = _fold(abs(r), gp)
                else:
                    gn = _fold(abs(r), gn)
            else:
                excess = max(0.0, abs(gj) - lam * alpha)
                if gj < 0:
                    gp = _fold(excess, gp)
                elif gj > 0:
                    gn = _fold(excess, gn)
    else:
        shrunk = soft_threshold(g, lam * alpha)
        excess = max(0.0, float(np.linalg.norm(shrunk)) - lam * (1 - alpha) * w)
        if excess > 0:
            if np.linalg.norm(negative_part(shrunk)) >= np.linalg.norm(
                positive_part(shrunk)
            ):
                gp = excess
            else:
                gn = excess
    return gp, gn


# -- start of the regularization path ----------------------------------------

def lambda_max_from_score(score: np.ndarray, spec: PenaltySpec) -> float:
    """Smallest penalty level at which the all-zero vector is optimal.

    ``score`` is the negated smooth-loss gradient at zero (``X^T y`` for the
    centered squared loss).
    """
    score = _check_len(score, spec)
    part = spec.partition
    if spec.family == "lasso":
        return float(np.max(np.abs(score))) if score.size else 0.0
    best = 0.0
    for idx, w in zip(part.groups, part.weights):
        s = score[idx]
        if spec.family == "group":
            val = np.linalg.norm(s) / w
        elif spec.family == "coop":
            val = (
                max(
                    np.linalg.norm(positive_part(s)),
                    np.linalg.norm(negative_part(s)),
                )
                / w
            )
        else:  # sgl: solve ||soft(s, lam*alpha)|| = lam*(1-alpha)*w by bisection
            val = _sgl_lambda_max_group(s, w, spec.alpha)
        best = max(best, float(val))
    return best


def _sgl_lambda_max_group(s: np.ndarray, w: float, alpha: float) -> float:
    if not np.any(s):
        return 0.0
    if alpha == 0.0:
        return float(np.linalg.norm(s)) / w
    if alpha == 1.0:
        return float(np.max(np.abs(s)))
    lo, hi = 0.0, float(np.max(np.abs(s))) / alpha

    def excess(lam):
        return np.linalg.norm(soft_threshold(s, lam * alpha)) - lam * (1 - alpha) * w

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return hi


def lambda_max(dataset, spec: PenaltySpec, loss=None) -> float:
    """Path anchor for a prepared dataset (see :mod:`cooplasso.glm`)."""
    from . import glm  # local import to avoid a cycle

    score = glm.score_at_null(dataset, loss)
    return lambda_max_from_score(score, spec)
