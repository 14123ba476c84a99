import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cooplasso import (
    DimensionMismatch,
    PenaltySpec,
    kkt_check,
    norm_value,
    prox,
    subdifferential_contains_zero,
    validate_partition,
)
from cooplasso import glm, lambda_max
from cooplasso.penalty import lambda_max_from_score, prox_sign_constrained

from conftest import random_partition


def one_group(w=1.0, size=2):
    return validate_partition([list(range(size))], weights=[w], p=size)


class TestNormValue:
    def test_coop_sums_orthant_norms(self):
        spec = PenaltySpec("coop", one_group())
        assert norm_value(np.array([3.0, -4.0]), spec) == pytest.approx(7.0)

    def test_group_is_euclidean(self):
        spec = PenaltySpec("group", one_group())
        assert norm_value(np.array([3.0, -4.0]), spec) == pytest.approx(5.0)

    def test_sgl_half_mix(self):
        spec = PenaltySpec("sgl", one_group(), alpha=0.5)
        assert norm_value(np.array([3.0, -4.0]), spec) == pytest.approx(6.0)

    def test_dimension_mismatch(self):
        spec = PenaltySpec("coop", one_group())
        with pytest.raises(DimensionMismatch):
            norm_value(np.ones(3), spec)

    def test_norm_ordering_random(self, rng):
        # group <= coop <= sqrt(2) * group, equality iff sign-coherent groups
        for _ in range(200):
            p = int(rng.integers(2, 12))
            part = random_partition(rng, p)
            v = rng.standard_normal(p)
            g = norm_value(v, PenaltySpec("group", part))
            c = norm_value(v, PenaltySpec("coop", part))
            assert g <= c + 1e-12
            assert c <= np.sqrt(2) * g + 1e-12
            coherent = all(
                not (np.any(v[idx] > 0) and np.any(v[idx] < 0))
                for idx in part.groups
            )
            if coherent:
                assert c == pytest.approx(g)
            else:
                assert c > g


class TestProx:
    def test_coop_orthant_separate(self):
        spec = PenaltySpec("coop", one_group())
        assert prox(np.array([3.0, -4.0]), 1.0, spec) == pytest.approx([2.0, -3.0])

    def test_group_joint_shrink(self):
        spec = PenaltySpec("group", one_group())
        assert prox(np.array([3.0, -4.0]), 1.0, spec) == pytest.approx([2.4, -3.2])

    def test_coop_thresholds_one_orthant(self):
        spec = PenaltySpec("coop", one_group())
        assert prox(np.array([0.5, -4.0]), 1.0, spec) == pytest.approx([0.0, -3.0])

    def test_t_zero_is_identity(self, rng):
        for fam in ("lasso", "group", "sgl", "coop"):
            part = random_partition(rng, 6)
            v = rng.standard_normal(6)
            assert prox(v, 0.0, PenaltySpec(fam, part)) == pytest.approx(v)

    @pytest.mark.parametrize("family", ["lasso", "group", "sgl", "coop"])
    def test_nonexpansive(self, family, rng):
        for _ in range(100):
            p = int(rng.integers(2, 10))
            part = random_partition(rng, p)
            spec = PenaltySpec(family, part, alpha=float(rng.random()))
            u, v = rng.standard_normal((2, p)) * 3
            t = float(rng.random() * 2)
            du = np.linalg.norm(prox(u, t, spec) - prox(v, t, spec))
            assert du <= np.linalg.norm(u - v) + 1e-10

    @pytest.mark.parametrize("family", ["lasso", "group", "sgl", "coop"])
    def test_prox_is_exact_minimizer(self, family, rng):
        # certificate: zero belongs to the subdifferential of the prox
        # objective at the output, and random perturbations never improve it
        for _ in range(50):
            p = int(rng.integers(2, 10))
            part = random_partition(rng, p)
            spec = PenaltySpec(family, part, alpha=float(rng.random()))
            v = rng.standard_normal(p) * 2
            t = float(0.1 + rng.random())
            b = prox(v, t, spec)
            report = kkt_check(b, b - v, t, spec)
            assert report.max_violation <= 1e-8
            obj = 0.5 * np.sum((b - v) ** 2) + t * norm_value(b, spec)
            for _ in range(5):
                eps = rng.standard_normal(p)
                eps *= 1e-3 / np.linalg.norm(eps)
                perturbed = 0.5 * np.sum((b + eps - v) ** 2) + t * norm_value(
                    b + eps, spec
                )
                assert perturbed > obj

    def test_coop_prox_sign_compatible(self, rng):
        for _ in range(100):
            p = int(rng.integers(2, 10))
            part = random_partition(rng, p)
            spec = PenaltySpec("coop", part)
            v = rng.standard_normal(p)
            b = prox(v, float(rng.random()), spec)
            assert np.all((np.sign(b) == 0) | (np.sign(b) == np.sign(v)))

    def test_coop_prox_zeroes_group_at_threshold(self, rng):
        for _ in range(50):
            size = int(rng.integers(1, 6))
            w = float(0.5 + rng.random())
            part = one_group(w, size)
            spec = PenaltySpec("coop", part)
            v = rng.standard_normal(size)
            thresh = max(
                np.linalg.norm(np.maximum(v, 0)), np.linalg.norm(np.maximum(-v, 0))
            )
            t = thresh / w * 1.0000001
            assert not prox(v, t, spec).any()

    def test_sign_constrained_matches_unconstrained_when_feasible(self, rng):
        part = random_partition(rng, 6, unit_weights=True)
        spec = PenaltySpec("coop", part)
        v = np.abs(rng.standard_normal(6))
        nonneg = np.ones(6, dtype=bool)
        nonpos = np.zeros(6, dtype=bool)
        out = prox_sign_constrained(v, 0.3, spec, nonneg, nonpos)
        assert out == pytest.approx(prox(v, 0.3, spec))

    def test_sign_constrained_clamps_infeasible(self):
        part = one_group(1.0, 2)
        spec = PenaltySpec("coop", part)
        v = np.array([3.0, -4.0])
        nonneg = np.array([True, True])
        out = prox_sign_constrained(v, 0.5, spec, nonneg, np.zeros(2, bool))
        # the negative entry is pinned at zero, the rest shrinks as usual
        assert out[1] == 0.0
        assert out[0] == pytest.approx(3.0 - 0.5)


class TestKktChecker:
    def test_zero_gradient_at_zero(self):
        part = one_group()
        spec = PenaltySpec("coop", part)
        report = kkt_check(np.zeros(2), np.zeros(2), 1.0, spec)
        assert report.max_violation == 0.0
        assert report.violating_group is None

    def test_positive_orthant_violation(self):
        part = one_group()
        spec = PenaltySpec("coop", part)
        report = kkt_check(np.zeros(2), np.array([-2.0, 0.0]), 1.0, spec)
        assert report.per_group_scores[0, 0] == pytest.approx(1.0)
        assert report.violating_orthant == "positive"
        assert report.max_violation == pytest.approx(1.0)

    def test_alias(self):
        assert subdifferential_contains_zero is kkt_check

    def test_max_is_max_of_scores(self, rng):
        part = random_partition(rng, 8)
        spec = PenaltySpec("coop", part)
        beta = rng.standard_normal(8) * rng.integers(0, 2, 8)
        grad = rng.standard_normal(8)
        report = kkt_check(beta, grad, 0.7, spec)
        assert report.max_violation == pytest.approx(report.per_group_scores.max())


class TestLambdaMax:
    def test_orthogonal_response_gives_zero(self):
        part = one_group()
        score = np.zeros(2)
        for fam in ("lasso", "group", "sgl", "coop"):
            assert lambda_max_from_score(score, PenaltySpec(fam, part)) == 0.0

    def test_coop_takes_orthant_max(self):
        spec = PenaltySpec("coop", one_group())
        assert lambda_max_from_score(np.array([3.0, -4.0]), spec) == pytest.approx(4.0)

    def test_group_takes_euclidean(self):
        spec = PenaltySpec("group", one_group())
        assert lambda_max_from_score(np.array([3.0, -4.0]), spec) == pytest.approx(5.0)

    def test_matches_dataset_version(self, rng):
        X = rng.standard_normal((20, 4))
        y = rng.standard_normal(20)
        ds = glm.prepare(X, y)
        part = random_partition(rng, 4)
        for fam in ("lasso", "group", "sgl", "coop"):
            spec = PenaltySpec(fam, part)
            assert lambda_max(ds, spec) == pytest.approx(
                lambda_max_from_score(ds.X.T @ ds.y, spec)
            )

    @pytest.mark.parametrize("family", ["lasso", "group", "sgl", "coop"])
    def test_zero_is_optimal_exactly_from_lambda_max(self, family, rng):
        # above the anchor the zero vector passes the checker; slightly below
        # it fails
        for _ in range(25):
            p = int(rng.integers(2, 9))
            part = random_partition(rng, p)
            spec = PenaltySpec(family, part, alpha=float(rng.random()))
            score = rng.standard_normal(p) * 2
            lam = lambda_max_from_score(score, spec)
            if lam == 0:
                continue
            ok = kkt_check(np.zeros(p), -score, lam * (1 + 1e-9), spec)
            bad = kkt_check(np.zeros(p), -score, lam * (1 - 1e-6), spec)
            assert ok.max_violation <= 1e-8
            assert bad.max_violation > 0


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=6),
    st.floats(0, 2, allow_nan=False),
)
def test_prox_reduces_objective_vs_input(vals, t):
    v = np.array(vals)
    part = one_group(1.0, len(vals))
    spec = PenaltySpec("coop", part)
    b = prox(v, t, spec)
    f_b = 0.5 * np.sum((b - v) ** 2) + t * norm_value(b, spec)
    f_v = t * norm_value(v, spec)
    assert f_b <= f_v + 1e-12
