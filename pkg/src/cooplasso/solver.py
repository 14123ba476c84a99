"""Active-set solver for penalized linear and logistic regression.

One fit alternates two steps until optimality:

1. solve the smooth problem restricted to the active coordinates, with the
   coefficients of each active group confined to the orthants where the
   penalty is differentiable (coefficients may be deactivated here);
2. score the optimality violation of every inactive group-orthant and
   activate the single worst one, stopping when none is violated.

The quadratic (squared-loss) subproblems are solved by cyclic block
proximal steps with exact per-block step sizes, finished by damped Newton
steps on the smooth manifold the sign pattern fixes; logistic subproblems
wrap the same machinery in iteratively reweighted least squares with a
proximal-gradient safeguard.  A plain full-vector proximal solver without
active sets (:func:`fit_reference`) is kept for cross-checks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import glm, penalty
from .errors import InputError, LineSearchFailure
from .groups import negative_part, positive_part, singleton_partition
from .penalty import PenaltySpec


@dataclass(frozen=True)
class ActiveSets:
    """Coordinates currently allowed to be positive / negative.

    Membership is granted and revoked per whole group and orthant; a
    coordinate outside both sets is pinned at zero.
    """

    A_plus: frozenset
    A_minus: frozenset

    @property
    def coordinates(self) -> frozenset:
        return self.A_plus | self.A_minus


@dataclass
class FitResult:
    beta: np.ndarray
    lam: float
    objective: float
    kkt_residual: float
    active: ActiveSets
    iterations: tuple
    converged: bool
    intercept: float = 0.0
    df: float | None = None
    kkt_report: penalty.KktReport = field(default=None, repr=False)


@dataclass
class PathResult:
    lambdas: np.ndarray
    fits: list
    spec: PenaltySpec

    def coefficients(self) -> np.ndarray:
        return np.array([f.beta for f in self.fits])

    def __len__(self) -> int:
        return len(self.fits)


# -- internal solver state ---------------------------------------------------

def _canonical(spec: PenaltySpec) -> PenaltySpec:
    """The l1 penalty is the coop penalty on singleton unit-weight groups;
    reusing that machinery gives the lasso per-coordinate activation."""
    if spec.family == "lasso":
        return PenaltySpec("coop", singleton_partition(spec.partition.p))
    return spec


class _SubProblem:
    """Quadratic model of one Step-1 solve on the active columns:
    ``0.5 v'Gv - lin'v`` with its largest eigenvalue."""

    def __init__(self, lipschitz, gram, lin):
        self.lipschitz = lipschitz
        self.gram = gram
        self.lin = lin


class _SquaredObjective:
    """Gram-form squared loss restricted to an index set."""

    def __init__(self, dataset):
        self.G = dataset.gram()
        self.b = dataset.xty()
        self.y2 = float(dataset.y @ dataset.y)

    def full_gradient(self, beta, intercept):
        return self.G @ beta - self.b, 0.0

    def value(self, beta, intercept):
        return 0.5 * float(beta @ (self.G @ beta)) - float(self.b @ beta) + 0.5 * self.y2

    def sub(self, idx):
        Gs = self.G[np.ix_(idx, idx)]
        lip = float(np.linalg.eigvalsh(Gs).max()) if idx.size else 1.0
        return _SubProblem(max(lip, 1e-12), Gs, self.b[idx])


class _LogisticObjective:
    def __init__(self, dataset):
        self.dataset = dataset

    def full_gradient(self, beta, intercept):
        _, g, gi = glm.loss_and_gradient(self.dataset, glm.LOGISTIC, beta, intercept)
        return g, gi

    def value(self, beta, intercept):
        v, _, _ = glm.loss_and_gradient(self.dataset, glm.LOGISTIC, beta, intercept)
        return v



def _objective_for(dataset, loss):
    if loss.kind == "squared":
        return _SquaredObjective(dataset)
    return _LogisticObjective(dataset)


def _local_groups(spec, idx):
    """Group index arrays and weights re-expressed on the subvector idx."""
    part = spec.partition
    pos_of = {int(j): i for i, j in enumerate(idx)}
    out = []
    for gidx, w in zip(part.groups, part.weights):
        local = [pos_of[int(j)] for j in gidx if int(j) in pos_of]
        if local:
            out.append((np.asarray(local, dtype=np.intp), float(w)))
    return out


def _make_local_spec(spec, local_groups, size):
    from .groups import validate_partition

    groups = [g for g, _ in local_groups]
    weights = [w for _, w in local_groups]
    return PenaltySpec(
        spec.family, validate_partition(groups, weights, size), spec.alpha
    )


def _irls_logistic(
    dataset,
    idx,
    local_spec,
    local_groups,
    lam,
    nonneg,
    nonpos,
    v0,
    b0,
    inner_tol,
    max_iter,
    max_irls=80,
):
    """Proximal-Newton solve of the logistic subproblem on active columns.

    Each round fits a penalized weighted least-squares model to the usual
    working response (intercept profiled out by weighted centering) with
    the quadratic block machinery, accepting the unit step only when the
    true objective decreases; otherwise a backtracked proximal-gradient
    step on the true objective keeps the iteration monotone.  Returns
    ``(v, intercept, inner_iterations)``.
    """
    Xs = dataset.X[:, idx]
    y = dataset.y
    v, b = v0.copy(), b0
    aug = np.concatenate([np.ones((Xs.shape[0], 1)), Xs], axis=1)
    lip_true = max(0.25 * float(np.linalg.norm(aug, 2)) ** 2, 1e-12)
    t_true = 1.0 / lip_true

    def parts(vv, bb):
        eta = np.clip(Xs @ vv + bb, -glm.ETA_CLAMP, glm.ETA_CLAMP)
        prob = 1.0 / (1.0 + np.exp(-eta))
        value = float(np.sum(np.logaddexp(0.0, eta) - y * eta))
        return eta, prob, value

    def penalized(vv, value):
        return value + lam * penalty.norm_value(vv, local_spec)

    def prox_residual(vv, grad, igrad):
        pv = penalty.prox_sign_constrained(
            vv - t_true * grad, t_true * lam, local_spec, nonneg, nonpos
        )
        return max(float(np.linalg.norm(pv - vv)) / t_true, abs(igrad))

    eta, prob, value = parts(v, b)
    obj = penalized(v, value)
    total_inner = 0
    for _ in range(max_irls):
        resid = prob - y
        grad = Xs.T @ resid
        igrad = float(resid.sum())
        if prox_residual(v, grad, igrad) <= inner_tol:
            return v, b, total_inner
        w = np.maximum(prob * (1.0 - prob), 1e-6)
        z = eta + (y - prob) / w
        sw = float(w.sum())
        xw = (w @ Xs) / sw
        zw = float(w @ z) / sw
        Xc = Xs - xw
        XW = Xc * w[:, None]
        G = Xc.T @ XW
        lin = XW.T @ (z - zw)
        lip = float(np.linalg.eigvalsh(G).max()) if idx.size else 1.0
        sub = _SubProblem(max(lip, 1e-12), G, lin)
        v_new, sweeps, _ = _bcd_polish(
            sub, local_spec, local_groups, lam, v.copy(), nonneg, nonpos,
            inner_tol, max_iter,
        )
        total_inner += sweeps + 1
        b_new = zw - float(xw @ v_new)
        eta_new, prob_new, value_new = parts(v_new, b_new)
        obj_new = penalized(v_new, value_new)
        if obj_new <= obj + 1e-12 * max(1.0, abs(obj)):
            v, b = v_new, b_new
            eta, prob, value, obj = eta_new, prob_new, value_new, obj_new
            continue
        # safeguard: one backtracked proximal-gradient step on the true loss
        t = t_true
        while True:
            v_try = penalty.prox_sign_constrained(
                v - t * grad, t * lam, local_spec, nonneg, nonpos
            )
            b_try = b - t * igrad
            _, _, value_try = parts(v_try, b_try)
            obj_try = penalized(v_try, value_try)
            if obj_try <= obj or t < 1e-18:
                break
            t *= 0.5
        if t < 1e-18:
            raise LineSearchFailure("logistic safeguard step underflow")
        v, b = v_try, b_try
        eta, prob, value = parts(v, b)
        obj = penalized(v, value)
        total_inner += 1
    return v, b, total_inner


def _bcd_polish(
    sub: _SubProblem,
    spec,
    local_groups,
    lam,
    v,
    nonneg,
    nonpos,
    inner_tol,
    max_sweeps,
):
    """Cyclic block proximal steps on a quadratic subproblem.

    Each active group takes one prox step with its own exact block
    Lipschitz constant; the blocks stay well conditioned even when the full
    Gram matrix is singular, which makes these sweeps the robust finisher
    near the small-penalty end of a path.  Returns ``(v, sweeps, hit_tol)``.
    """
    G, b = sub.gram, sub.lin
    if G is None:
        return v, 0, False
    t_full = 1.0 / sub.lipschitz

    def residual(vec, grd):
        pv = penalty.prox_sign_constrained(
            vec - t_full * grd, t_full * lam, spec, nonneg, nonpos
        )
        return float(np.linalg.norm(pv - vec)) / t_full

    grad = G @ v - b  # maintained incrementally across block updates
    if all(g.size == 1 for g, _ in local_groups):
        return _cd_singletons(
            G, b, grad, v, lam, spec, local_groups, nonneg, nonpos, residual,
            inner_tol, max_sweeps,
        )

    blocks = []
    for gidx, w in local_groups:
        Gb = G[np.ix_(gidx, gidx)]
        lip_b = float(np.linalg.eigvalsh(Gb).max()) if gidx.size > 1 else float(
            Gb[0, 0]
        )
        blocks.append(
            (gidx, w, max(lip_b, 1e-12), np.ascontiguousarray(G[:, gidx]),
             nonneg[gidx], nonpos[gidx])
        )
    n_blocks = len(blocks)
    hot = range(n_blocks)
    sweeps = 0
    hit = False
    while sweeps < max_sweeps:
        sweeps += 1
        # full sweeps refresh the hot set; restricted ones cycle over the
        # blocks still moving
        full = sweeps % 5 == 1
        scan = range(n_blocks) if full else hot
        new_hot = []
        for bi in scan:
            gidx, w, lip_b, Gcols, nn, nps = blocks[bi]
            z = v[gidx] - grad[gidx] / lip_b
            new = _block_prox(z, lam / lip_b, spec, w, nn, nps)
            dv = new - v[gidx]
            if np.any(dv != 0.0):
                grad += Gcols @ dv
                v[gidx] = new
                new_hot.append(bi)
        stationary = full and not new_hot
        hot = new_hot or hot
        if stationary or sweeps <= 2 or sweeps % 10 == 0 or sweeps == max_sweeps:
            grad = G @ v - b  # refresh against incremental drift
            if residual(v, grad) <= inner_tol:
                hit = True
                break
            if stationary:
                break  # blockwise fixed point; nothing further to gain
            if sweeps >= 10:
                # the sign pattern has usually settled by now; a Newton step
                # on the smooth manifold finishes much faster than sweeping
                v = _newton_polish(
                    G, b, v, lam, spec, local_groups, nonneg, nonpos
                )
                grad = G @ v - b
                if residual(v, grad) <= inner_tol:
                    hit = True
                    break
                hot = range(n_blocks)
    return v, sweeps, hit


def _newton_polish(G, b, v, lam, spec, local_groups, nonneg, nonpos,
                   max_newton=10):
    """Newton steps on the smooth manifold fixed by the sign pattern of v.

    On a fixed pattern the penalty is twice differentiable in the working
    coordinates, so the quadratic subproblem yields to a few damped Newton
    solves.  Steps are projected back onto the pattern's orthant (crossing
    coordinates clamp to zero) and accepted only on objective decrease, so
    this can only improve the iterate handed back to the sweep loop.
    """
    p = v.size

    def pen_grad_hess(vec, vars_sel):
        m = vars_sel.size
        pos_of = {int(j): i for i, j in enumerate(vars_sel)}
        theta = np.zeros(m)
        H = np.zeros((m, m))
        for gidx, w in local_groups:
            z = vec[gidx]
            if spec.family == "coop":
                parts = [gidx[z > 0], gidx[z < 0]]
            else:
                if not np.any(z != 0):
                    continue
                parts = [gidx] if spec.family == "group" else [gidx[z != 0]]
            for part in parts:
                if part.size == 0:
                    continue
                x = vec[part]
                r = float(np.linalg.norm(x))
                if r <= 0:
                    continue
                sel = np.array([pos_of[int(j)] for j in part if int(j) in pos_of])
                if sel.size != part.size:
                    return None, None  # pattern out of sync; let sweeps fix it
                w_eff = w if spec.family != "sgl" else (1.0 - spec.alpha) * w
                theta[sel] += w_eff * x / r
                H[np.ix_(sel, sel)] -= (w_eff / r**3) * np.outer(x, x)
                H[sel, sel] += w_eff / r
            if spec.family == "sgl":
                nz = gidx[z != 0]
                sel = np.array([pos_of[int(j)] for j in nz if int(j) in pos_of])
                theta[sel] += spec.alpha * np.sign(vec[nz])
        return theta, H

    def objective(vec):
        return 0.5 * float(vec @ (G @ vec)) - float(b @ vec) + lam * _pattern_pen(
            vec
        )

    def _pattern_pen(vec):
        total = 0.0
        for gidx, w in local_groups:
            z = vec[gidx]
            if spec.family == "coop":
                total += w * (
                    np.linalg.norm(np.maximum(z, 0))
                    + np.linalg.norm(np.maximum(-z, 0))
                )
            elif spec.family == "group":
                total += w * np.linalg.norm(z)
            else:
                total += (1 - spec.alpha) * w * np.linalg.norm(z) + (
                    spec.alpha * np.sum(np.abs(z))
                )
        return float(total)

    obj = objective(v)
    for _ in range(max_newton):
        if spec.family == "group":
            group_on = np.zeros(p, dtype=bool)
            for gidx, _ in local_groups:
                if np.any(v[gidx] != 0):
                    group_on[gidx] = True
            vars_sel = np.flatnonzero(group_on)
        else:
            vars_sel = np.flatnonzero(v != 0)
        if vars_sel.size == 0:
            return v
        theta, Hpen = pen_grad_hess(v, vars_sel)
        if theta is None:
            return v
        g = (G @ v - b)[vars_sel] + lam * theta
        H = G[np.ix_(vars_sel, vars_sel)] + lam * Hpen
        H[np.diag_indices_from(H)] += 1e-10 * max(1.0, float(np.trace(H)) / H.shape[0])
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            return v
        signs = np.sign(v[vars_sel])
        t = 1.0
        improved = False
        while t > 1e-6:
            cand = v.copy()
            moved = v[vars_sel] + t * step
            if spec.family != "group":
                moved[np.sign(moved) == -signs] = 0.0  # stay in the orthant
            cand[vars_sel] = moved
            cand[nonneg & (cand < 0)] = 0.0
            cand[nonpos & (cand > 0)] = 0.0
            cand_obj = objective(cand)
            if cand_obj < obj - 1e-14 * max(1.0, abs(obj)):
                v = cand
                obj = cand_obj
                improved = True
                break
            t *= 0.25
        if not improved:
            return v
        if float(np.abs(t * step).max()) < 1e-14:
            return v
    return v


def _cd_singletons(
    G, b, grad, v, lam, spec, local_groups, nonneg, nonpos, residual,
    inner_tol, max_sweeps,
):
    """Scalar coordinate descent for all-singleton partitions (the l1 case)."""
    p = v.size
    diag = np.maximum(np.diag(G).copy(), 1e-12)
    thr = np.empty(p)
    for gidx, w in local_groups:
        thr[gidx[0]] = lam * w
    thr /= diag
    lo_zero = nonneg  # z below zero gets clamped
    hi_zero = nonpos
    sweeps = 0
    hit = False
    hot = range(p)
    while sweeps < max_sweeps:
        sweeps += 1
        full = sweeps % 5 == 1
        scan = range(p) if full else hot
        new_hot = []
        for j in scan:
            z = v[j] - grad[j] / diag[j]
            if (lo_zero[j] and z < 0.0) or (hi_zero[j] and z > 0.0):
                z = 0.0
            t = thr[j]
            if z > t:
                new = z - t
            elif z < -t:
                new = z + t
            else:
                new = 0.0
            dv = new - v[j]
            if dv != 0.0:
                grad += G[j] * dv  # symmetric Gram: row j is column j
                v[j] = new
                new_hot.append(j)
        stationary = full and not new_hot
        hot = new_hot or hot
        if stationary or sweeps <= 2 or sweeps % 10 == 0 or sweeps == max_sweeps:
            grad = G @ v - b
            if residual(v, grad) <= inner_tol:
                hit = True
                break
            if stationary:
                break
            if sweeps >= 10:
                v = _newton_polish(
                    G, b, v, lam, spec, local_groups, nonneg, nonpos
                )
                grad = G @ v - b
                if residual(v, grad) <= inner_tol:
                    hit = True
                    break
                hot = range(p)
    return v, sweeps, hit


def _block_prox(z, t, spec, w, nonneg, nonpos):
    # z is a freshly allocated temporary, safe to clamp in place
    z[nonneg & (z < 0)] = 0.0
    z[nonpos & (z > 0)] = 0.0
    if spec.family == "coop":
        return penalty._coop_prox_group(z, t * w)
    if spec.family == "group":
        return penalty.group_shrink(z, t * w)
    # sgl
    u = penalty.soft_threshold(z, t * spec.alpha)
    return penalty.group_shrink(u, t * (1.0 - spec.alpha) * w)


def solve_active_subproblem(
    dataset,
    spec: PenaltySpec,
    lam: float,
    active: ActiveSets,
    beta_init: np.ndarray,
    loss: glm.LossSpec = glm.SQUARED,
    intercept_init: float = 0.0,
    tol: float = 1e-7,
    max_iter: int = 20000,
):
    """Step 1 of the active-set algorithm.

    Minimizes the penalized loss over the active coordinates under the
    orthant constraints implied by ``active`` and reports the groups whose
    active orthant part landed at zero with the matching side of the
    optimality conditions satisfied (those are removed from the sets).

    Returns ``(beta, intercept, deactivated, active_out, inner_iterations)``
    where ``deactivated`` is a list of ``(group, orthant)`` pairs.
    """
    spec_c = _canonical(spec)
    state = _ActiveState.from_sets(spec_c, active)
    beta = np.asarray(beta_init, dtype=float).copy()
    obj = _objective_for(dataset, loss)
    beta, intercept, inner = _step1(
        obj, spec_c, lam, state, beta, intercept_init, loss, tol, max_iter
    )
    grad, _ = obj.full_gradient(beta, intercept)
    deactivated = _deactivate(spec_c, state, beta, grad, lam, tol)
    return beta, intercept, deactivated, state.to_sets(spec_c), inner


class _ActiveState:
    """Per-group orthant activation flags."""

    def __init__(self, K):
        self.plus = np.zeros(K, dtype=bool)
        self.minus = np.zeros(K, dtype=bool)

    @classmethod
    def from_beta(cls, spec, beta):
        st = cls(spec.partition.n_groups)
        for k, idx in enumerate(spec.partition.groups):
            b = beta[idx]
            st.plus[k] = bool(np.any(b > 0))
            st.minus[k] = bool(np.any(b < 0))
            if spec.family in ("group", "sgl") and (st.plus[k] or st.minus[k]):
                st.plus[k] = st.minus[k] = True
        return st

    @classmethod
    def from_sets(cls, spec, active: ActiveSets):
        st = cls(spec.partition.n_groups)
        for k, idx in enumerate(spec.partition.groups):
            members = set(int(j) for j in idx)
            st.plus[k] = bool(members & active.A_plus)
            st.minus[k] = bool(members & active.A_minus)
        return st

    def to_sets(self, spec) -> ActiveSets:
        plus, minus = set(), set()
        for k, idx in enumerate(spec.partition.groups):
            if self.plus[k]:
                plus.update(int(j) for j in idx)
            if self.minus[k]:
                minus.update(int(j) for j in idx)
        return ActiveSets(frozenset(plus), frozenset(minus))

    def active_coords(self, spec):
        sel = []
        for k, idx in enumerate(spec.partition.groups):
            if self.plus[k] or self.minus[k]:
                sel.append(idx)
        if not sel:
            return np.empty(0, dtype=np.intp)
        return np.sort(np.concatenate(sel))


def _step1(obj, spec, lam, state, beta, intercept, loss, tol, max_iter):
    idx = state.active_coords(spec)
    beta = beta.copy()
    # anything outside the active coordinates is pinned at zero
    mask = np.zeros(beta.size, dtype=bool)
    mask[idx] = True
    beta[~mask] = 0.0
    if idx.size == 0:
        if loss.kind == "logistic":
            intercept = _fit_null_intercept(obj, intercept)
        return beta, intercept, 0
    local_groups = _local_groups(spec, idx)
    local_spec = _make_local_spec(spec, local_groups, idx.size)
    nonneg = np.zeros(idx.size, dtype=bool)
    nonpos = np.zeros(idx.size, dtype=bool)
    if spec.family == "coop":
        pos_of = {int(j): i for i, j in enumerate(idx)}
        for k, gidx in enumerate(spec.partition.groups):
            if not (state.plus[k] or state.minus[k]):
                continue
            local = [pos_of[int(j)] for j in gidx]
            if state.plus[k] and not state.minus[k]:
                nonneg[local] = True
            elif state.minus[k] and not state.plus[k]:
                nonpos[local] = True
    v0 = beta[idx]
    v0[nonneg & (v0 < 0)] = 0.0
    v0[nonpos & (v0 > 0)] = 0.0

    if loss.kind == "squared":
        # quadratic subproblems go straight to cyclic block steps: the
        # blocks stay well conditioned (and linearly convergent) even when
        # the full active Gram block is singular near the path tail
        v, inner, _ = _bcd_polish(
            obj.sub(idx), local_spec, local_groups, lam, v0, nonneg, nonpos,
            tol, max_iter,
        )
        b = intercept
    else:
        v, b, inner = _irls_logistic(
            obj.dataset, idx, local_spec, local_groups, lam, nonneg, nonpos,
            v0, intercept, tol, max_iter,
        )
    beta[idx] = v
    return beta, b, inner


def _fit_null_intercept(obj, b0):
    if not isinstance(obj, _LogisticObjective):
        return 0.0
    y = obj.dataset.y
    ybar = float(np.clip(y.mean(), 1e-12, 1 - 1e-12))
    return float(np.log(ybar / (1 - ybar)))


def _deactivate(spec, state, beta, grad, lam, tol):
    """Remove group-orthants whose part vanished with no remaining pull."""
    removed = []
    part = spec.partition
    for k, (idx, w) in enumerate(zip(part.groups, part.weights)):
        b = beta[idx]
        g = grad[idx]
        scale = max(1.0, lam * w)
        if spec.family in ("group", "sgl"):
            if state.plus[k] and not np.any(b != 0):
                score = _activation_score_group(spec, g, lam, w) / scale
                if score <= tol:
                    state.plus[k] = state.minus[k] = False
                    removed.append((k, "both"))
            continue
        if state.plus[k] and not np.any(b > 0):
            pull = max(0.0, np.linalg.norm(negative_part(g)) - lam * w) / scale
            if pull <= tol:
                state.plus[k] = False
                removed.append((k, "positive"))
        if state.minus[k] and not np.any(b < 0):
            pull = max(0.0, np.linalg.norm(positive_part(g)) - lam * w) / scale
            if pull <= tol:
                state.minus[k] = False
                removed.append((k, "negative"))
    return removed


def _activation_score_group(spec, g, lam, w):
    if spec.family == "group":
        return max(0.0, float(np.linalg.norm(g)) - lam * w)
    shrunk = penalty.soft_threshold(g, lam * spec.alpha)
    return max(0.0, float(np.linalg.norm(shrunk)) - lam * (1 - spec.alpha) * w)


def _step2_scores(spec, state, grad, lam):
    """Normalized violation scores of every inactive group-orthant."""
    part = spec.partition
    K = part.n_groups
    scores = np.zeros((K, 2))
    for k, (idx, w) in enumerate(zip(part.groups, part.weights)):
        g = grad[idx]
        scale = max(1.0, lam * w)
        if spec.family in ("group", "sgl"):
            if not state.plus[k]:
                s = _activation_score_group(spec, g, lam, w) / scale
                scores[k, 0] = scores[k, 1] = s
            continue
        if not state.plus[k]:
            scores[k, 0] = (
                max(0.0, np.linalg.norm(negative_part(g)) - lam * w) / scale
            )
        if not state.minus[k]:
            scores[k, 1] = (
                max(0.0, np.linalg.norm(positive_part(g)) - lam * w) / scale
            )
    return scores


def _pick_violation(scores):
    best = scores.max()
    if best <= 0:
        return None
    for k in range(scores.shape[0]):
        if scores[k, 0] == best:
            return k, "positive"
        if scores[k, 1] == best:
            return k, "negative"
    return None


def fit(
    dataset,
    spec: PenaltySpec,
    lam: float,
    init: np.ndarray | None = None,
    tol: float = 1e-6,
    max_iter: int = 1000,
    loss: glm.LossSpec = glm.SQUARED,
    inner_max_iter: int = 50000,
) -> FitResult:
    """Fit one penalized estimate at penalty level ``lam``.

    The result carries its own optimality certificate: ``kkt_residual`` is
    recomputed from the final gradient, not taken from solver bookkeeping.
    On non-convergence the best iterate is returned with
    ``converged=False`` and a warning.
    """
    if lam < 0:
        raise InputError("lam must be nonnegative")
    user_spec = spec
    spec = _canonical(spec)
    p = spec.partition.p
    if dataset.p != p:
        raise InputError(
            f"dataset has {dataset.p} columns but the partition covers {p}"
        )
    obj = _objective_for(dataset, loss)

    if p == 0 or not np.any(dataset.y):
        beta = np.zeros(p)
        report = penalty.kkt_check(beta, np.zeros(p), lam, user_spec)
        return FitResult(
            beta, lam, obj.value(beta, 0.0), report.max_violation,
            ActiveSets(frozenset(), frozenset()), (0, 0), True,
            kkt_report=report,
        )

    beta = np.zeros(p) if init is None else np.asarray(init, dtype=float).copy()
    intercept = glm.null_intercept(dataset, loss) if loss.kind == "logistic" else 0.0
    state = _ActiveState.from_beta(spec, beta)

    if lam == 0.0 and loss.kind == "squared":
        rank = np.linalg.matrix_rank(dataset.X)
        if rank < p:
            warnings.warn(
                "X is rank deficient at lam=0; the minimizer is not unique",
                stacklevel=2,
            )
            beta, *_ = np.linalg.lstsq(dataset.X, dataset.y, rcond=None)
            grad, _ = obj.full_gradient(beta, 0.0)
            report = penalty.kkt_check(beta, grad, 0.0, user_spec)
            return FitResult(
                beta, 0.0, obj.value(beta, 0.0), report.max_violation,
                _ActiveState.from_beta(spec, beta).to_sets(spec),
                (0, 0), False, kkt_report=report,
            )

    inner_tol = tol / 10.0
    total_inner = 0
    outer = 0
    best = None
    tighten = 0
    while outer < max_iter:
        outer += 1
        beta, intercept, inner = _step1(
            obj, spec, lam, state, beta, intercept, loss, inner_tol, inner_max_iter
        )
        total_inner += inner
        grad, gi = obj.full_gradient(beta, intercept)
        _deactivate(spec, state, beta, grad, lam, tol)
        scores = _step2_scores(spec, state, grad, lam)
        pick = _pick_violation(scores) if scores.max() > tol else None
        if pick is None:
            report = penalty.kkt_check(beta, grad, lam, user_spec)
            residual = report.max_violation
            if loss.kind == "logistic":
                residual = max(residual, abs(gi))
            if best is None or residual < best[0]:
                best = (residual, beta.copy(), intercept, report)
            if residual <= tol:
                return FitResult(
                    beta, lam, obj.value(beta, intercept) + lam * penalty.norm_value(
                        beta, user_spec
                    ),
                    residual, state.to_sets(spec), (outer, total_inner), True,
                    intercept=intercept, kkt_report=report,
                )
            # the inner solve was not tight enough for the certificate
            tighten += 1
            inner_tol *= 0.1
            if tighten > 6:
                break
            continue
        k, orthant = pick
        if spec.family in ("group", "sgl"):
            state.plus[k] = state.minus[k] = True
        elif orthant == "positive":
            state.plus[k] = True
        else:
            state.minus[k] = True

    if best is None:
        grad, gi = obj.full_gradient(beta, intercept)
        report = penalty.kkt_check(beta, grad, lam, user_spec)
        best = (report.max_violation, beta.copy(), intercept, report)
    residual, beta, intercept, report = best
    warnings.warn(
        f"fit did not reach tol={tol:g} (kkt residual {residual:.3g}); "
        "returning the best iterate",
        stacklevel=2,
    )
    return FitResult(
        beta, lam,
        obj.value(beta, intercept) + lam * penalty.norm_value(beta, user_spec),
        residual, _ActiveState.from_beta(spec, beta).to_sets(spec),
        (outer, total_inner), False, intercept=intercept, kkt_report=report,
    )


def lambda_grid(
    dataset,
    spec: PenaltySpec,
    n_lambda: int = 100,
    lambda_min_ratio: float | None = None,
    loss: glm.LossSpec = glm.SQUARED,
) -> np.ndarray:
    """Log-spaced penalty grid from the path anchor down."""
    if n_lambda < 2:
        raise InputError("n_lambda must be at least 2")
    lam_max = penalty.lambda_max(dataset, spec, loss)
    if lam_max == 0.0:
        return np.zeros(1)
    if lambda_min_ratio is None:
        lambda_min_ratio = 1e-3 if dataset.n > dataset.p else 1e-2
    return np.geomspace(lam_max, lam_max * lambda_min_ratio, n_lambda)


def path(
    dataset,
    spec: PenaltySpec,
    n_lambda: int = 100,
    lambda_min_ratio: float | None = None,
    tol: float = 1e-6,
    loss: glm.LossSpec = glm.SQUARED,
    lambdas: np.ndarray | None = None,
) -> PathResult:
    """Warm-started regularization path on a decreasing penalty grid."""
    if lambdas is None:
        lambdas = lambda_grid(dataset, spec, n_lambda, lambda_min_ratio, loss)
    else:
        lambdas = np.asarray(lambdas, dtype=float)
        if np.any(np.diff(lambdas) > 0):
            raise InputError("lambdas must be non-increasing")
    fits = []
    init = None
    for lam in lambdas:
        res = fit(dataset, spec, float(lam), init=init, tol=tol, loss=loss)
        fits.append(res)
        init = res.beta
    return PathResult(lambdas=lambdas, fits=fits, spec=spec)


def fit_reference(
    dataset,
    spec: PenaltySpec,
    lam: float,
    loss: glm.LossSpec = glm.SQUARED,
    tol: float = 1e-9,
    max_iter: int = 500000,
) -> FitResult:
    """Plain proximal-gradient reference: full vector, no active sets.

    Deliberately simple (fixed step, unaccelerated) so it shares no logic
    with :func:`fit` beyond the proximal operator itself.
    """
    p = dataset.p
    if loss.kind == "squared":
        G = dataset.gram()
        b = dataset.xty()
        lip = float(np.linalg.eigvalsh(G).max()) if p else 1.0

        def grad_fn(v, b0):
            return G @ v - b, 0.0

        def val_fn(v, b0):
            return 0.5 * float(v @ (G @ v)) - float(b @ v) + 0.5 * float(
                dataset.y @ dataset.y
            )

        has_b = False
        intercept = 0.0
    else:
        aug = np.concatenate([np.ones((dataset.n, 1)), dataset.X], axis=1)
        lip = 0.25 * float(np.linalg.norm(aug, 2)) ** 2

        def grad_fn(v, b0):
            _, g, gi = glm.loss_and_gradient(dataset, loss, v, b0)
            return g, gi

        def val_fn(v, b0):
            return glm.loss_and_gradient(dataset, loss, v, b0)[0]

        has_b = True
        intercept = glm.null_intercept(dataset, loss)

    step = 1.0 / max(lip, 1e-12)
    v = np.zeros(p)
    it = 0
    for it in range(1, max_iter + 1):
        g, gi = grad_fn(v, intercept)
        v_new = penalty.prox(v - step * g, step * lam, spec)
        b_new = intercept - step * gi if has_b else intercept
        res = np.linalg.norm(v_new - v) / step
        if has_b:
            res = max(res, abs(gi))
        v, intercept = v_new, b_new
        if res <= tol:
            break
    g, gi = grad_fn(v, intercept)
    report = penalty.kkt_check(v, g, lam, spec)
    obj = val_fn(v, intercept) + lam * penalty.norm_value(v, spec)
    return FitResult(
        v, lam, obj, report.max_violation,
        ActiveSets(
            frozenset(np.flatnonzero(v > 0).tolist()),
            frozenset(np.flatnonzero(v < 0).tolist()),
        ),
        (1, it), res <= tol, intercept=intercept, kkt_report=report,
    )
