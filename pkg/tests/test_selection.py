import numpy as np
import pytest

from selective_bayes import (
    ContractViolationError,
    EmptySelectionError,
    InvalidSplitError,
    SelectionContext,
    carve_split,
    lasso_fit,
    lasso_polytope,
    randomize,
    selection_context,
)
from selective_bayes.model import Polytope


def _instance(rng, n=40, p=10, k=3, snr=3.0):
    X = rng.standard_normal((n, p))
    X /= np.linalg.norm(X, axis=0)
    beta = np.zeros(p)
    beta[:k] = snr * rng.choice([-1.0, 1.0], size=k)
    y = X @ beta + rng.standard_normal(n)
    return X, y


class TestLassoFit:
    def test_kkt_conditions_hold(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            X, y = _instance(rng)
            lam = 0.3
            E, signs, beta = lasso_fit(X, y, lam)
            g = X.T @ (y - X @ beta)
            # active scores sit exactly at +-lambda, inactive inside
            np.testing.assert_allclose(g[list(E)], lam * signs, atol=1e-6)
            inactive = [j for j in range(X.shape[1]) if j not in E]
            if inactive:
                assert np.max(np.abs(g[inactive])) <= lam * (1 + 1e-8)

    def test_orthogonal_design_soft_threshold(self):
        # X = I: lasso is componentwise soft thresholding
        y = np.array([2.5, -0.4, 1.2])
        E, signs, beta = lasso_fit(np.eye(3), y, 1.0)
        assert E == (0, 2)
        np.testing.assert_array_equal(signs, [1.0, 1.0])
        np.testing.assert_allclose(beta, [1.5, 0.0, 0.2], atol=1e-10)

    def test_empty_selection_raises(self):
        with pytest.raises(EmptySelectionError):
            lasso_fit(np.eye(2), np.array([0.1, -0.2]), 5.0)

    def test_input_validation(self):
        with pytest.raises(ContractViolationError):
            lasso_fit(np.eye(3), np.ones(2), 1.0)
        with pytest.raises(ContractViolationError):
            lasso_fit(np.eye(2), np.ones(2), 0.0)


class TestLassoPolytope:
    def test_orthogonal_halfplanes(self):
        # X = I2, active {0} with sign +1 at lambda 1: event is
        # {y1 >= 1, |y2| <= 1}
        P = lasso_polytope(np.eye(2), [0], np.array([1.0]), 1.0)
        assert P.m == 3
        assert P.contains([1.5, 0.3])
        assert not P.contains([0.5, 0.3])
        assert not P.contains([1.5, 1.2])
        assert not P.contains([1.5, -1.2])

    def test_event_soundness(self):
        # the observed response lies inside its own selection event
        rng = np.random.default_rng(1)
        for _ in range(50):
            X, y = _instance(rng)
            E, signs, _ = lasso_fit(X, y, 0.3)
            P = lasso_polytope(X, E, signs, 0.3)
            assert np.all(P.slack(y) > -1e-7)

    def test_event_completeness(self):
        # points strictly inside the event reproduce (E, signs); points
        # outside do not
        rng = np.random.default_rng(2)
        checked_in = checked_out = 0
        for _ in range(40):
            X, y = _instance(rng)
            E, signs, _ = lasso_fit(X, y, 0.3)
            P = lasso_polytope(X, E, signs, 0.3)
            for _ in range(3):
                y2 = y + 0.05 * rng.standard_normal(y.shape[0])
                s = P.slack(y2)
                if np.min(s) > 1e-6:
                    E2, signs2, _ = lasso_fit(X, y2, 0.3)
                    assert E2 == E and np.array_equal(signs2, signs)
                    checked_in += 1
                elif np.min(s) < -1e-6:
                    try:
                        E2, signs2, _ = lasso_fit(X, y2, 0.3)
                        same = E2 == E and np.array_equal(signs2, signs)
                    except EmptySelectionError:
                        same = False
                    assert not same
                    checked_out += 1
        assert checked_in >= 20 and checked_out >= 5

    def test_row_count(self):
        rng = np.random.default_rng(3)
        X, y = _instance(rng, p=8)
        E, signs, _ = lasso_fit(X, y, 0.3)
        P = lasso_polytope(X, E, signs, 0.3)
        assert P.m == len(E) + 2 * (8 - len(E))


class TestRandomizeAndCarve:
    def test_randomize_moments(self):
        rng = np.random.default_rng(4)
        y = np.zeros(100000)
        y_r, w = randomize(y, 0.25, rng)
        np.testing.assert_array_equal(y_r, w)
        assert np.var(w) == pytest.approx(0.25, rel=0.02)
        assert np.mean(w) == pytest.approx(0.0, abs=0.01)

    def test_randomize_zero_variance(self):
        rng = np.random.default_rng(5)
        y = np.arange(4.0)
        y_r, w = randomize(y, 0.0, rng)
        np.testing.assert_array_equal(y_r, y)
        np.testing.assert_array_equal(w, np.zeros(4))

    def test_carve_split_partitions(self):
        rng = np.random.default_rng(6)
        for n, frac in [(10, 0.2), (57, 0.33), (100, 0.5)]:
            s1, s2 = carve_split(n, frac, rng)
            assert len(s1) + len(s2) == n
            assert len(s2) == int(round(frac * n))
            assert sorted(set(s1) | set(s2)) == list(range(n))
            assert list(s1) == sorted(s1) and list(s2) == sorted(s2)

    def test_carve_split_degenerate(self):
        rng = np.random.default_rng(7)
        with pytest.raises(InvalidSplitError):
            carve_split(3, 0.5, rng)
        with pytest.raises(ContractViolationError):
            carve_split(10, 0.0, rng)


class TestSelectionContext:
    def test_plain_round_trip(self):
        rng = np.random.default_rng(8)
        X, y = _instance(rng)
        ctx, beta = selection_context(X, y, 0.3)
        assert ctx.gamma2 == 0.0
        assert ctx.randomization_draw is None
        assert ctx.carve_indices is None
        assert ctx.polytope.contains(y, tol=1e-7)
        assert ctx.n_active == len(ctx.E)
        np.testing.assert_array_equal(np.sign(beta[list(ctx.E)]), ctx.signs)

    def test_randomized_stores_draw(self):
        rng = np.random.default_rng(9)
        X, y = _instance(rng)
        ctx, _ = selection_context(X, y, 0.3, gamma2=0.5, rng=rng)
        assert ctx.gamma2 == 0.5
        w = ctx.randomization_draw
        assert w is not None and w.shape == y.shape
        # the event holds at the randomized response, not necessarily at y
        assert ctx.polytope.contains(y + w, tol=1e-7)

    def test_carved_polytope_lives_in_stage1(self):
        rng = np.random.default_rng(10)
        X, y = _instance(rng, n=50)
        ctx, _ = selection_context(X, y, 0.3, rng=rng, holdout_fraction=0.3)
        s1, s2 = ctx.carve_indices
        assert len(s1) == 35 and len(s2) == 15
        assert ctx.polytope.d == 35
        assert ctx.polytope.contains(y[list(s1)], tol=1e-7)

    def test_exclusive_regimes(self):
        rng = np.random.default_rng(11)
        X, y = _instance(rng)
        with pytest.raises(ContractViolationError):
            selection_context(X, y, 0.3, gamma2=0.5, rng=rng,
                              holdout_fraction=0.2)

    def test_context_validation(self):
        P = Polytope(np.array([[-1.0]]), np.array([0.0]))
        with pytest.raises(EmptySelectionError):
            SelectionContext(E=(), signs=np.array([]), polytope=P, lam=1.0)
        with pytest.raises(ContractViolationError):
            SelectionContext(E=(1, 0), signs=np.array([1.0, 1.0]),
                             polytope=P, lam=1.0)
        with pytest.raises(ContractViolationError):
            SelectionContext(E=(0,), signs=np.array([0.5]), polytope=P,
                             lam=1.0)
        with pytest.raises(ContractViolationError):
            SelectionContext(E=(0,), signs=np.array([1.0]), polytope=P,
                             lam=-1.0)
