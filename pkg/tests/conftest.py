import numpy as np
import pytest

from cooplasso import PenaltySpec, kkt_check, validate_partition
from cooplasso import glm


def random_partition(rng, p, max_group=4, unit_weights=False):
    """Split 0..p-1 into consecutive groups of random sizes."""
    groups = []
    start = 0
    while start < p:
        size = int(rng.integers(1, min(max_group, p - start) + 1))
        groups.append(list(range(start, start + size)))
        start += size
    weights = np.ones(len(groups)) if unit_weights else None
    return validate_partition(groups, weights=weights, p=p)


def random_instance(rng, n_max=30, p_max=10):
    n = int(rng.integers(10, n_max + 1))
    p = int(rng.integers(2, p_max + 1))
    X = rng.standard_normal((n, p))
    beta = rng.standard_normal(p) * rng.integers(0, 2, size=p)
    y = X @ beta + 0.5 * rng.standard_normal(n)
    return glm.prepare(X, y), random_partition(rng, p)


def certify(fit_result, dataset, spec, loss=glm.SQUARED, tol=1e-6):
    """Assert the optimality certificate of a fit from scratch, without
    trusting the solver's own bookkeeping."""
    _, grad, _ = glm.loss_and_gradient(
        dataset, loss, fit_result.beta, fit_result.intercept
    )
    report = kkt_check(fit_result.beta, grad, fit_result.lam, spec)
    assert report.max_violation <= tol, (
        f"kkt violation {report.max_violation:.3g} at lam={fit_result.lam:.4g} "
        f"({spec.family})"
    )
    return report


@pytest.fixture
def rng():
    return np.random.default_rng(20240731)
