import numpy as np
import pytest

from cooplasso import NonBinaryResponse, loss_and_gradient, prepare
from cooplasso import glm


class TestPrepare:
    def test_squared_centers_both(self, rng):
        X = rng.standard_normal((15, 3)) + 5
        y = rng.standard_normal(15) + 2
        ds = prepare(X, y)
        assert np.abs(ds.X.mean(axis=0)).max() < 1e-12
        assert abs(ds.y.mean()) < 1e-12
        assert ds.column_means == pytest.approx(X.mean(axis=0))
        assert ds.y_mean == pytest.approx(y.mean())

    def test_already_centered_records_near_zero_means(self, rng):
        X = rng.standard_normal((50, 3))
        X -= X.mean(axis=0)
        y = rng.standard_normal(50)
        y -= y.mean()
        ds = prepare(X, y)
        assert np.abs(ds.column_means).max() < 1e-12
        assert abs(ds.y_mean) < 1e-12

    def test_constant_column_flagged(self, rng):
        X = rng.standard_normal((10, 3))
        X[:, 1] = 4.2
        with pytest.warns(UserWarning, match="constant"):
            ds = prepare(X, rng.standard_normal(10))
        assert list(ds.constant_columns) == [1]
        assert np.all(ds.X[:, 1] == 0.0)

    def test_logistic_keeps_binary_response(self, rng):
        X = rng.standard_normal((20, 2))
        y = rng.integers(0, 2, 20).astype(float)
        ds = prepare(X, y, glm.LOGISTIC)
        assert set(np.unique(ds.y)) <= {0.0, 1.0}

    def test_logistic_rejects_nonbinary(self, rng):
        X = rng.standard_normal((10, 2))
        with pytest.raises(NonBinaryResponse):
            prepare(X, rng.standard_normal(10), glm.LOGISTIC)

    def test_standardize_std(self, rng):
        X = rng.standard_normal((200, 3)) * np.array([1.0, 5.0, 0.2])
        ds = prepare(X, rng.standard_normal(200), standardize="std")
        assert ds.X.std(axis=0) == pytest.approx(np.ones(3))

    def test_within_class_scaling(self, rng):
        X = rng.standard_normal((400, 2)) * np.array([2.0, 0.5])
        y = rng.integers(0, 2, 400).astype(float)
        ds = prepare(X, y, glm.LOGISTIC, standardize="within-class")
        pooled = 0.0
        for cls in (0.0, 1.0):
            rows = y == cls
            pooled += rows.mean() * ds.X[rows].var(axis=0)
        assert pooled == pytest.approx(np.ones(2))

    def test_raw_scale_round_trip(self, rng):
        # prediction after un-centering equals the fit with an explicit
        # intercept on uncentered data
        X = rng.standard_normal((40, 3)) + 3
        beta = np.array([1.0, -2.0, 0.5])
        y = X @ beta + 1.7 + 0.1 * rng.standard_normal(40)
        ds = prepare(X, y)
        bhat = np.linalg.lstsq(ds.X, ds.y, rcond=None)[0]
        pred_centered = glm.predict(ds, bhat)
        design = np.column_stack([np.ones(40), X])
        coef = np.linalg.lstsq(design, y, rcond=None)[0]
        pred_direct = design @ coef
        assert pred_centered == pytest.approx(pred_direct)


class TestLossAndGradient:
    def test_squared_at_zero(self, rng):
        X = rng.standard_normal((30, 4))
        y = rng.standard_normal(30)
        ds = prepare(X, y)
        value, grad, _ = loss_and_gradient(ds, glm.SQUARED, np.zeros(4))
        assert value == pytest.approx(0.5 * ds.y @ ds.y)
        assert grad == pytest.approx(-ds.X.T @ ds.y)

    def test_logistic_at_zero_balanced(self, rng):
        X = rng.standard_normal((30, 2))
        y = np.r_[np.zeros(15), np.ones(15)]
        ds = prepare(X, y, glm.LOGISTIC)
        value, _, _ = loss_and_gradient(ds, glm.LOGISTIC, np.zeros(2), 0.0)
        assert value == pytest.approx(30 * np.log(2))

    @pytest.mark.parametrize("kind", ["squared", "logistic"])
    def test_gradient_matches_finite_differences(self, kind, rng):
        loss = glm.LossSpec(kind)
        X = rng.standard_normal((25, 4))
        if kind == "squared":
            y = rng.standard_normal(25)
        else:
            y = rng.integers(0, 2, 25).astype(float)
        ds = prepare(X, y, loss)
        beta = rng.standard_normal(4) * 0.5
        intercept = 0.2 if kind == "logistic" else 0.0
        _, grad, igrad = loss_and_gradient(ds, loss, beta, intercept)
        h = 1e-6
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            up = loss_and_gradient(ds, loss, beta + e, intercept)[0]
            dn = loss_and_gradient(ds, loss, beta - e, intercept)[0]
            fd = (up - dn) / (2 * h)
            assert grad[j] == pytest.approx(fd, rel=1e-5, abs=1e-7)
        if kind == "logistic":
            up = loss_and_gradient(ds, loss, beta, intercept + h)[0]
            dn = loss_and_gradient(ds, loss, beta, intercept - h)[0]
            assert igrad == pytest.approx((up - dn) / (2 * h), rel=1e-5)

    @pytest.mark.parametrize("kind", ["squared", "logistic"])
    def test_convexity_midpoint(self, kind, rng):
        loss = glm.LossSpec(kind)
        X = rng.standard_normal((20, 5))
        y = (
            rng.standard_normal(20)
            if kind == "squared"
            else rng.integers(0, 2, 20).astype(float)
        )
        ds = prepare(X, y, loss)
        for _ in range(50):
            b1, b2 = rng.standard_normal((2, 5))
            mid = loss_and_gradient(ds, loss, 0.5 * (b1 + b2))[0]
            avg = 0.5 * (
                loss_and_gradient(ds, loss, b1)[0]
                + loss_and_gradient(ds, loss, b2)[0]
            )
            assert mid <= avg + 1e-12

    def test_logistic_gradient_structure(self, rng):
        X = rng.standard_normal((30, 3))
        y = rng.integers(0, 2, 30).astype(float)
        ds = prepare(X, y, glm.LOGISTIC)
        beta = rng.standard_normal(3)
        _, grad, _ = loss_and_gradient(ds, glm.LOGISTIC, beta, 0.1)
        eta = ds.X @ beta + 0.1
        prob = 1 / (1 + np.exp(-eta))
        assert np.all(prob > 0) and np.all(prob < 1)
        assert grad == pytest.approx(ds.X.T @ (prob - y))

    def test_extreme_predictor_is_clamped(self, rng):
        X = np.full((5, 1), 1e4)
        y = np.array([0.0, 1.0, 0.0, 1.0, 1.0])
        ds = prepare(X + rng.standard_normal((5, 1)), y, glm.LOGISTIC)
        value, grad, _ = loss_and_gradient(ds, glm.LOGISTIC, np.array([50.0]), 0.0)
        assert np.isfinite(value)
        assert np.all(np.isfinite(grad))


def test_score_at_null_logistic_uses_null_intercept(rng):
    X = rng.standard_normal((40, 3))
    y = (rng.random(40) < 0.3).astype(float)
    ds = prepare(X, y, glm.LOGISTIC)
    score = glm.score_at_null(ds)
    assert score == pytest.approx(ds.X.T @ (y - y.mean()), abs=1e-10)


def test_nonfinite_loss_raised_on_overflow(rng):
    from cooplasso import NonFiniteLoss

    X = rng.standard_normal((10, 2)) * 1e200
    y = rng.standard_normal(10)
    ds = prepare(X / 1e200, y)
    ds.X[:] = X  # bypass preparation to force an overflowing design
    with pytest.raises(NonFiniteLoss):
        loss_and_gradient(ds, glm.SQUARED, np.array([1e200, 1e200]))
