import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relsense import hyperopt
from relsense.hyperopt import (Dim, KernelDraw, SearchSpace, Trial, default_space,
                               expected_improvement, gp_posterior,
                               log_marginal_likelihood, matern52, matern52_matrix,
                               run_search, sample_kernel_hyperparams, suggest_next)

# closed form (1 + sqrt(5) + 5/3) * exp(-sqrt(5)) evaluated at 50 digits
MATERN_AT_UNIT_DISTANCE = 0.52399410883182031
# standard normal density at zero
PHI_ZERO = 0.39894228040143268


def _completed(points, objectives):
    out = []
    for u, obj in zip(points, objectives):
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        out.append(Trial(u=u, config={f"x{i}": float(v) for i, v in enumerate(u)},
                         objective=float(obj)))
    return out


class TestMatern:
    def test_self_covariance_is_amplitude(self):
        x = np.array([0.3, 0.7])
        assert matern52(x, x, np.array([0.5, 2.0]), 1.7) == pytest.approx(1.7)

    def test_unit_distance_closed_form(self):
        k = matern52(np.array([0.0]), np.array([1.0]), np.array([1.0]), 1.0)
        assert k == pytest.approx(MATERN_AT_UNIT_DISTANCE, rel=1e-14)

    def test_monotone_decreasing_in_distance(self):
        rs = np.linspace(0, 4, 60)
        ks = [matern52(np.array([0.0]), np.array([r]), np.array([1.0]), 1.0)
              for r in rs]
        assert all(a > b for a, b in zip(ks, ks[1:]))

    def test_symmetry_and_matrix_agreement(self):
        rng = np.random.default_rng(0)
        X = rng.random((4, 3))
        Y = rng.random((5, 3))
        ell = np.array([0.3, 1.0, 2.0])
        K = matern52_matrix(X, Y, ell, 2.0)
        for i in range(4):
            for j in range(5):
                assert K[i, j] == pytest.approx(matern52(X[i], Y[j], ell, 2.0), rel=1e-12)
        Kxx = matern52_matrix(X, X, ell, 2.0)
        np.testing.assert_allclose(Kxx, Kxx.T, atol=1e-15)


class TestGpPosterior:
    def test_interpolates_observations_at_zero_noise(self):
        rng = np.random.default_rng(1)
        X = rng.random((5, 2))
        y = rng.normal(0, 1, 5)
        mean, var = gp_posterior(X, y, 0.0, 0.0, np.array([0.5, 0.5]), 1.0, X)
        np.testing.assert_allclose(mean, y, atol=1e-8)
        assert np.all(var <= 1e-8)

    def test_reverts_to_prior_far_away(self):
        rng = np.random.default_rng(2)
        X = rng.random((4, 2))
        y = rng.normal(0, 1, 4)
        far = X + 500.0
        mean, var = gp_posterior(X, y, 0.01, 0.37, np.array([1.0, 1.0]), 1.9, far)
        np.testing.assert_allclose(mean, 0.37, atol=1e-9)
        np.testing.assert_allclose(var, 1.9, atol=1e-9)

    def test_single_observation_closed_form(self):
        # place the query where the kernel value equals exactly 0.5
        from scipy.optimize import brentq
        r_half = brentq(lambda r: (1 + np.sqrt(5) * r + 5 * r * r / 3)
                        * np.exp(-np.sqrt(5) * r) - 0.5, 0.1, 5.0)
        mean, var = gp_posterior(np.array([[0.0]]), np.array([2.0]), 0.0, 0.0,
                                 np.array([1.0]), 1.0, np.array([[r_half]]))
        assert mean[0] == pytest.approx(1.0, abs=1e-10)
        assert var[0] == pytest.approx(0.75, abs=1e-10)

    def test_variance_nonnegative(self):
        rng = np.random.default_rng(3)
        X = rng.random((8, 3))
        y = rng.normal(0, 1, 8)
        Q = rng.random((50, 3))
        _, var = gp_posterior(X, y, 1e-6, 0.0, np.array([0.2, 0.2, 0.2]), 1.0, Q)
        assert np.all(var >= 0.0)

    def test_duplicate_points_fall_back_to_jitter(self):
        X = np.zeros((3, 2))
        y = np.array([1.0, 1.0, 1.0])
        mean, var = gp_posterior(X, y, 0.0, 0.0, np.array([1.0, 1.0]), 1.0, X)
        np.testing.assert_allclose(mean, 1.0, atol=1e-3)


class TestExpectedImprovement:
    def test_deterministic_improvement_at_zero_sigma(self):
        assert expected_improvement(np.array([0.7]), np.array([0.0]), 1.0)[0] \
            == pytest.approx(0.3)

    def test_no_improvement_at_zero_sigma(self):
        assert expected_improvement(np.array([1.3]), np.array([0.0]), 1.0)[0] == 0.0

    def test_at_the_incumbent_with_unit_sigma(self):
        ei = expected_improvement(np.array([1.0]), np.array([1.0]), 1.0)[0]
        assert ei == pytest.approx(PHI_ZERO, rel=1e-12)

    def test_nonnegative(self):
        rng = np.random.default_rng(4)
        ei = expected_improvement(rng.normal(0, 3, 100), rng.random(100) * 4, 0.0)
        assert np.all(ei >= 0.0)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-3, 0.9), st.floats(0.01, 2.0), st.floats(0.05, 2.0))
    def test_monotone_in_sigma_below_incumbent(self, mu, s1, ds):
        best = 1.0
        e1 = expected_improvement(np.array([mu]), np.array([s1 ** 2]), best)[0]
        e2 = expected_improvement(np.array([mu]), np.array([(s1 + ds) ** 2]), best)[0]
        assert e2 >= e1 - 1e-12


class TestKernelSampling:
    def test_deterministic(self):
        rng = np.random.default_rng(5)
        X = rng.random((6, 2))
        y = rng.normal(0, 1, 6)
        d1 = sample_kernel_hyperparams(X, y, seed=7)
        d2 = sample_kernel_hyperparams(X, y, seed=7)
        assert len(d1) == len(d2) == 10
        for a, b in zip(d1, d2):
            np.testing.assert_array_equal(a.log_ell, b.log_ell)
            assert (a.log_amp, a.log_noise, a.mu0) == (b.log_amp, b.log_noise, b.mu0)

    def test_constant_objective_keeps_finite_likelihood(self):
        rng = np.random.default_rng(6)
        X = rng.random((6, 2))
        y = np.zeros(6)
        draws = sample_kernel_hyperparams(X, y, seed=1)
        lls = [log_marginal_likelihood(X, y, d) for d in draws]
        assert all(np.isfinite(v) for v in lls)
        assert np.median([d.noise for d in draws]) < 0.1

    def test_needs_two_observations(self):
        with pytest.raises(ValueError, match="at least 2"):
            sample_kernel_hyperparams(np.zeros((1, 1)), np.zeros(1), seed=0)

    def test_lengthscale_recovery_on_smooth_function(self):
        X = np.linspace(0, 1, 8)[:, None]
        y = np.sin(2 * np.pi * X[:, 0])
        draws = sample_kernel_hyperparams(X, y, seed=3)
        med = float(np.median([d.ell[0] for d in draws]))
        assert 0.05 <= med <= 5.0
        # grid-scan oracle: the marginal-likelihood argmax lies in the same window
        grid = np.exp(np.linspace(np.log(0.01), np.log(10.0), 80))
        lls = [log_marginal_likelihood(
            X, y, KernelDraw(log_ell=np.log([l]), log_amp=0.0, log_noise=-6.0, mu0=0.0))
            for l in grid]
        assert 0.05 <= grid[int(np.argmax(lls))] <= 5.0


class TestSearchSpace:
    def test_default_space_matches_published_ranges(self):
        space = default_space()
        byname = {d.name: d for d in space.dims}
        assert (byname["lstm1"].lower, byname["lstm1"].upper) == (64, 320)
        assert (byname["lstm2"].lower, byname["lstm2"].upper) == (64, 100)
        assert (byname["dense2"].lower, byname["dense2"].upper) == (64, 100)
        assert (byname["dropout1"].lower, byname["dropout1"].upper) == (0.0, 0.9)
        assert (byname["learning_rate"].lower, byname["learning_rate"].upper) == (0.001, 0.5)
        assert byname["lstm4"].kind == "integer"
        assert byname["learning_rate"].kind == "real"

    def test_best_published_config_is_in_bounds(self):
        best = {"lstm1": 259, "lstm2": 75, "lstm3": 263, "lstm4": 127, "lstm5": 89,
                "lstm6": 150, "dense1": 269, "dense2": 69, "dropout1": 0.11,
                "dropout2": 0.57, "learning_rate": 0.1549}
        assert default_space().contains(best)

    def test_decode_rounds_integers_half_up(self):
        space = SearchSpace(dims=[Dim("n", 0, 10, "integer")])
        assert space.decode(np.array([0.05]))["n"] == 1   # 0.5 rounds up
        assert space.decode(np.array([0.04]))["n"] == 0
        assert space.decode(np.array([1.0]))["n"] == 10

    def test_invalid_space_rejected(self):
        with pytest.raises(ValueError, match="lower"):
            SearchSpace(dims=[Dim("a", 1.0, 1.0)])
        with pytest.raises(ValueError, match="duplicate"):
            SearchSpace(dims=[Dim("a", 0, 1), Dim("a", 0, 2)])


class TestSuggestNext:
    def test_empty_history_in_bounds(self):
        space = default_space()
        trial = suggest_next([], space, seed=0)
        assert space.contains(trial.config)

    def test_first_three_are_distinct_space_fillers(self):
        space = SearchSpace(dims=[Dim("x", 0.0, 1.0)])
        seen = []
        history = []
        for _ in range(3):
            t = suggest_next(history, space, seed=4)
            seen.append(t.config["x"])
            t.objective = 1.0
            history.append(t)
        # one point per third of the interval (Latin hypercube strata)
        assert sorted(int(v * 3) for v in seen) == [0, 1, 2]

    def test_identical_history_moves_away_from_incumbent(self):
        space = SearchSpace(dims=[Dim("x", 0.0, 1.0)])
        history = [Trial(u=np.array([0.5]), config={"x": 0.5}, objective=1.0)
                   for _ in range(4)]
        trial = suggest_next(history, space, seed=0)
        assert abs(trial.config["x"] - 0.5) > 1e-6

    def test_quadratic_objective_suggests_near_minimum(self):
        space = SearchSpace(dims=[Dim("x", 0.0, 1.0)])
        xs = [0.05, 0.15, 0.25, 0.42, 0.6, 0.9]
        history = _completed([[x] for x in xs], [(x - 0.3) ** 2 for x in xs])
        for t in history:
            t.config = {"x": float(t.u[0])}
        trial = suggest_next(history, space, seed=0)
        assert abs(trial.config["x"] - 0.3) <= 0.15

    def test_standardization_shift_invariance(self):
        space = SearchSpace(dims=[Dim("x", 0.0, 1.0)])
        xs = [0.1, 0.35, 0.5, 0.77, 0.9]
        base = _completed([[x] for x in xs], [(x - 0.4) ** 2 for x in xs])
        shifted = _completed([[x] for x in xs], [(x - 0.4) ** 2 + 100.0 for x in xs])
        t1 = suggest_next(base, space, seed=2)
        t2 = suggest_next(shifted, space, seed=2)
        assert t1.config == t2.config

    def test_integrality_and_bounds_over_a_run(self):
        space = default_space()
        history = []
        rng = np.random.default_rng(0)
        for i in range(6):
            t = suggest_next(history, space, seed=1)
            assert space.contains(t.config)
            t.objective = float(rng.random())
            history.append(t)


def _branin(cfg):
    x1, x2 = cfg["x1"], cfg["x2"]
    b, c = 5.1 / (4 * np.pi ** 2), 5 / np.pi
    t = 1 / (8 * np.pi)
    return (x2 - b * x1 ** 2 + c * x1 - 6.0) ** 2 + 10.0 * (1 - t) * np.cos(x1) + 10.0


def _branin_space():
    return SearchSpace(dims=[Dim("x1", -5.0, 10.0), Dim("x2", 0.0, 15.0)])


class TestRunSearch:
    def test_budget_one_returns_single_trial(self):
        best, trace = run_search(_branin, _branin_space(), budget=1, seed=0)
        assert len(trace) == 1
        assert best.objective == trace[0]["objective"]

    def test_trace_monotone_and_complete(self):
        _, trace = run_search(_branin, _branin_space(), budget=12, seed=1)
        assert len(trace) == 12
        bests = [row["best_so_far"] for row in trace]
        assert all(a >= b for a, b in zip(bests, bests[1:]))
        assert all(_branin_space().contains(row["config"]) for row in trace)

    def test_failures_are_penalized_not_fatal(self):
        calls = {"n": 0}

        def flaky(cfg):
            calls["n"] += 1
            if calls["n"] % 3 == 0:
                raise RuntimeError("boom")
            if calls["n"] % 3 == 1:
                return float("nan")
            return _branin(cfg)

        best, trace = run_search(flaky, _branin_space(), budget=9, seed=2)
        assert len(trace) == 9
        assert np.isfinite(best.objective)
        assert sum(1 for row in trace if row["objective"] == np.inf) == 6

    def test_deterministic_per_seed(self):
        b1, t1 = run_search(_branin, _branin_space(), budget=8, seed=5)
        b2, t2 = run_search(_branin, _branin_space(), budget=8, seed=5)
        assert [r["config"] for r in t1] == [r["config"] for r in t2]
        assert [r["objective"] for r in t1] == [r["objective"] for r in t2]
        assert b1.objective == b2.objective

    def test_invalid_budget(self):
        with pytest.raises(ValueError, match="budget"):
            run_search(_branin, _branin_space(), budget=0, seed=0)
