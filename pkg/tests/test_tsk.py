import json
import math

import numpy as np
import pytest

from sonfis.tabular import rmse
from sonfis.tsk import (
    SIGMA_FLOOR,
    GaussianMf,
    TskModel,
    TskRegressor,
    TskRule,
    firing_strengths,
    gaussian_mf,
    gradient_check,
    grid_partition_model,
    infer,
    init_tsk,
    load_model,
    lse_consequents,
    predict,
    save_model,
    subtractive_cluster,
    train_hybrid,
)


def random_model(rng, d=2, n_rules=4, sigma_lo=0.05, sigma_hi=0.5):
    rules = []
    for _ in range(n_rules):
        premise = tuple(
            GaussianMf(float(c), float(s))
            for c, s in zip(rng.uniform(0, 1, d), rng.uniform(sigma_lo, sigma_hi, d))
        )
        rules.append(TskRule(premise, tuple(rng.normal(size=d)), float(rng.normal())))
    return TskModel(rules, np.zeros(d), np.ones(d))


class TestGaussian:
    def test_peak_at_center(self):
        assert gaussian_mf(3.0, GaussianMf(3.0, 0.7)) == 1.0

    def test_one_sigma_value(self):
        assert gaussian_mf(1.5, GaussianMf(1.0, 0.5)) == pytest.approx(math.exp(-0.5), abs=1e-12)

    def test_symmetry(self):
        mf = GaussianMf(2.0, 0.3)
        assert gaussian_mf(2.0 + 0.11, mf) == pytest.approx(gaussian_mf(2.0 - 0.11, mf), abs=1e-15)

    def test_sigma_must_be_positive(self):
        with pytest.raises(ValueError):
            GaussianMf(0.0, 0.0)


class TestInfer:
    def test_constant_consequent(self):
        rule = TskRule((GaussianMf(0.5, 0.2),), (0.0,), 7.5)
        model = TskModel([rule], [0.0], [1.0])
        for x in (0.0, 0.3, 0.99):
            assert infer(model, [x]) == pytest.approx(7.5, abs=1e-12)

    def test_equal_firing_averages_consequents(self):
        # two symmetric rules around the query point with constant outputs 2 and 4
        rules = [
            TskRule((GaussianMf(0.4, 0.25),), (0.0,), 2.0),
            TskRule((GaussianMf(0.6, 0.25),), (0.0,), 4.0),
        ]
        model = TskModel(rules, [0.0], [1.0])
        assert infer(model, [0.5]) == pytest.approx(3.0, abs=1e-12)

    def test_firing_is_one_at_premise_centers(self):
        rng = np.random.default_rng(0)
        model = random_model(rng, d=3, n_rules=3)
        centers = np.array([mf.center for mf in model.rules[1].premise])
        w = firing_strengths(model, centers)
        assert w[1] == pytest.approx(1.0, abs=1e-12)

    def test_normalized_firings_sum_to_one_and_convex(self):
        rng = np.random.default_rng(1)
        model = random_model(rng, d=2, n_rules=5)
        X = rng.uniform(-2, 3, size=(50, 2))
        Z = model.normalize(X)
        from sonfis.tsk import _normalized_firings

        wbar = _normalized_firings(model, Z)
        np.testing.assert_allclose(wbar.sum(axis=1), 1.0, atol=1e-12)
        _, _, P, B = model._arrays()
        G = Z @ P.T + B
        out = predict(model, X)
        assert np.all(out <= G.max(axis=1) + 1e-9)
        assert np.all(out >= G.min(axis=1) - 1e-9)

    def test_far_inputs_stay_finite(self):
        rng = np.random.default_rng(2)
        model = random_model(rng, d=2, n_rules=3, sigma_lo=0.01, sigma_hi=0.02)
        out = predict(model, np.array([[1e6, -1e6]]))
        assert np.all(np.isfinite(out))

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(3)
        model = random_model(rng, d=2)
        with pytest.raises(ValueError):
            infer(model, [1.0, 2.0, 3.0])

    def test_single_rule_model_is_affine(self):
        rng = np.random.default_rng(4)
        model = random_model(rng, d=2, n_rules=1)
        a = infer(model, [0.1, 0.2])
        b = infer(model, [0.9, 0.2])
        c = infer(model, [0.5, 0.2])
        assert c == pytest.approx((a + b) / 2, abs=1e-9)

    def test_output_continuous_in_input(self):
        rng = np.random.default_rng(21)
        model = random_model(rng, d=2, n_rules=4)
        for _ in range(20):
            x = rng.uniform(0, 1, size=2)
            bumped = x + rng.choice([-1e-7, 1e-7], size=2)
            assert abs(infer(model, x) - infer(model, bumped)) < 1e-4


class TestSubtractiveClustering:
    def test_single_point(self):
        centers = subtractive_cluster(np.array([[0.3, 0.7]]))
        np.testing.assert_array_equal(centers, [[0.3, 0.7]])

    def test_two_separated_clusters(self):
        rng = np.random.default_rng(5)
        a = np.clip(rng.normal(0.2, 0.03, size=(40, 2)), 0, 1)
        b = np.clip(rng.normal(0.8, 0.03, size=(40, 2)), 0, 1)
        centers = subtractive_cluster(np.vstack([a, b]), radius=0.5)
        assert len(centers) == 2
        found_low = any(np.all((0.1 <= c) & (c <= 0.3)) for c in centers)
        found_high = any(np.all((0.7 <= c) & (c <= 0.9)) for c in centers)
        assert found_low and found_high

    def test_identical_points_single_center(self):
        data = np.tile([0.4, 0.4], (25, 1))
        centers = subtractive_cluster(data, radius=0.3)
        assert len(centers) == 1

    def test_centers_are_data_points(self):
        rng = np.random.default_rng(6)
        data = rng.uniform(0, 1, size=(30, 3))
        centers = subtractive_cluster(data, radius=0.6)
        rows = {tuple(r) for r in data}
        assert all(tuple(c) in rows for c in centers)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            subtractive_cluster(np.empty((0, 2)))
        with pytest.raises(ValueError):
            subtractive_cluster(np.array([[0.5]]), radius=0.0)
        with pytest.raises(ValueError):
            subtractive_cluster(np.array([[2.0]]))


class TestInitAndLse:
    def test_single_rule_reproduces_line(self):
        x = np.linspace(0, 10, 50).reshape(-1, 1)
        y = 2 * x[:, 0] + 1
        model = init_tsk(np.array([[0.5]]), x, y, radius=0.5)
        assert rmse(predict(model, x), y) < 1e-9

    def test_rule_count_matches_centers(self):
        rng = np.random.default_rng(7)
        X = rng.uniform(0, 1, size=(40, 2))
        y = rng.normal(size=40)
        model = init_tsk(rng.uniform(0, 1, size=(3, 2)), X, y)
        assert model.n_rules == 3

    def test_degenerate_column_sigma_floor(self):
        X = np.column_stack([np.linspace(0, 1, 20), np.full(20, 4.0)])
        model = init_tsk(np.array([[0.5, 0.5]]), X, X[:, 0])
        assert model.rules[0].premise[1].sigma == SIGMA_FLOOR

    def test_extra_target_column_ignored(self):
        rng = np.random.default_rng(8)
        X = rng.uniform(0, 1, size=(30, 2))
        y = rng.normal(size=30)
        centers = rng.uniform(0, 1, size=(2, 3))  # includes clustered target coord
        model = init_tsk(centers, X, y)
        assert model.input_dim == 2

    def test_no_centers_rejected(self):
        with pytest.raises(ValueError):
            init_tsk(np.empty((0, 1)), np.linspace(0, 1, 5).reshape(-1, 1), np.zeros(5))

    def test_lse_is_sse_minimum(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(0, 1, size=(60, 2))
        y = rng.normal(size=60)
        model = lse_consequents(random_model(rng, d=2, n_rules=3), X, y)
        base_sse = np.sum((predict(model, X) - y) ** 2)
        for _ in range(50):
            r = rng.integers(model.n_rules)
            j = rng.integers(3)
            delta = rng.choice([-1e-3, 1e-3])
            rules = list(model.rules)
            coeffs = list(rules[r].coeffs)
            bias = rules[r].bias
            if j < 2:
                coeffs[j] += delta
            else:
                bias += delta
            rules[r] = TskRule(rules[r].premise, tuple(coeffs), bias)
            perturbed = TskModel(rules, model.input_min, model.input_max)
            assert np.sum((predict(perturbed, X) - y) ** 2) >= base_sse - 1e-12


class TestGridPartition:
    def test_three_mfs_centers(self):
        X = np.random.default_rng(10).uniform(0, 5, size=(30, 2))
        model = grid_partition_model(X, X[:, 0], n_mfs=3)
        assert model.n_rules == 9
        centers = sorted({mf.center for r in model.rules for mf in r.premise})
        assert centers == [0.0, 0.5, 1.0]
        sigmas = {mf.sigma for r in model.rules for mf in r.premise}
        assert sigmas == {0.25}

    def test_rule_cap(self):
        X = np.random.default_rng(11).uniform(0, 1, size=(10, 7))
        with pytest.raises(ValueError, match="cap"):
            grid_partition_model(X, X[:, 0], n_mfs=3, max_rules=100)


class TestHybridTraining:
    def test_linear_data_one_epoch(self):
        x = np.linspace(-3, 3, 50).reshape(-1, 1)
        y = 2 * x[:, 0] + 1
        model = init_tsk(np.array([[0.5]]), x, y)
        best, trace = train_hybrid(model, x, y, epochs=1)
        assert trace[0] < 1e-6
        assert rmse(predict(best, x), y) < 1e-6

    def test_zero_learning_rate_is_pure_lse(self):
        rng = np.random.default_rng(12)
        X = rng.uniform(0, 1, size=(40, 2))
        y = rng.normal(size=40)
        start = random_model(rng, d=2, n_rules=3)
        lse_only = lse_consequents(start, X, y)
        trained, trace = train_hybrid(start, X, y, epochs=1, learning_rate=0.0)
        np.testing.assert_allclose(predict(trained, X), predict(lse_only, X), atol=1e-12)
        assert len(trace) == 1

    def test_trace_records_every_epoch(self):
        rng = np.random.default_rng(13)
        X = rng.uniform(0, 1, size=(30, 2))
        y = np.sin(X[:, 0] * 4) + X[:, 1]
        model = init_tsk(rng.uniform(0, 1, size=(3, 2)), X, y)
        best, trace = train_hybrid(model, X, y, epochs=7, learning_rate=0.05)
        assert len(trace) == 7
        assert rmse(predict(best, X), y) == pytest.approx(min(trace), abs=1e-12)

    def test_first_trace_entry_beats_zero_model(self):
        rng = np.random.default_rng(14)
        X = rng.uniform(0, 1, size=(50, 2))
        y = rng.normal(size=50) + 3.0
        model = random_model(rng, d=2, n_rules=3)
        _, trace = train_hybrid(model, X, y, epochs=1, learning_rate=0.0)
        zero_rmse = rmse(np.zeros_like(y), y)
        assert trace[0] <= zero_rmse

    def test_epochs_validated(self):
        rng = np.random.default_rng(15)
        model = random_model(rng)
        with pytest.raises(ValueError):
            train_hybrid(model, np.zeros((2, 2)), np.zeros(2), epochs=0)


class TestGradientCheck:
    def test_random_models_close_to_fd(self):
        rng = np.random.default_rng(16)
        for _ in range(20):
            d = int(rng.integers(1, 4))
            model = random_model(rng, d=d, n_rules=int(rng.integers(1, 9)))
            X = rng.uniform(0, 1, size=(25, d))
            y = rng.normal(size=25)
            assert gradient_check(model, X, y) <= 1e-4

    def test_stationary_point_passes(self):
        # single rule: premise has no effect, gradients are exactly zero
        rule = TskRule((GaussianMf(0.5, 0.3),), (1.0,), 0.0)
        model = TskModel([rule], [0.0], [1.0])
        X = np.linspace(0, 1, 20).reshape(-1, 1)
        y = X[:, 0].copy()
        from sonfis.tsk import premise_gradients

        gc, gs = premise_gradients(model, X, y)
        assert abs(gc).max() < 1e-12 and abs(gs).max() < 1e-12
        assert gradient_check(model, X, y) <= 1e-4

    def test_sigma_floor_relaxed_tolerance(self):
        rng = np.random.default_rng(17)
        premise = (GaussianMf(0.5, SIGMA_FLOOR), GaussianMf(0.4, 0.3))
        rules = [
            TskRule(premise, (1.0, -1.0), 0.3),
            TskRule((GaussianMf(0.2, 0.25), GaussianMf(0.7, 0.25)), (0.5, 0.5), -0.2),
        ]
        model = TskModel(rules, [0.0, 0.0], [1.0, 1.0])
        X = rng.uniform(0, 1, size=(30, 2))
        y = rng.normal(size=30)
        assert gradient_check(model, X, y) <= 1e-3


class TestSerialisation:
    def test_bit_exact_round_trip(self, tmp_path):
        rng = np.random.default_rng(18)
        model = random_model(rng, d=3, n_rules=4)
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        assert back.input_dim == model.input_dim
        np.testing.assert_array_equal(back.input_min, model.input_min)
        np.testing.assert_array_equal(back.input_max, model.input_max)
        for a, b in zip(model.rules, back.rules):
            assert a == b

    def test_kind_tag_checked(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"kind": "rules"}))
        with pytest.raises(ValueError):
            load_model(path)


class TestRegressor:
    def test_fit_predict_improves_on_mean(self):
        rng = np.random.default_rng(19)
        X = rng.uniform(0, 4, size=(150, 2))
        y = np.sin(X[:, 0]) * 3 + 0.5 * X[:, 1]
        reg = TskRegressor(radius=0.4, epochs=15).fit(X, y)
        pred = reg.predict(X)
        assert rmse(pred, y) < 0.5 * rmse(np.full_like(y, y.mean()), y)

    def test_grid_init(self):
        rng = np.random.default_rng(20)
        X = rng.uniform(0, 1, size=(60, 2))
        y = X[:, 0] - X[:, 1]
        reg = TskRegressor(init="grid", n_mfs=2, epochs=3).fit(X, y)
        assert reg.model_.n_rules == 4
        assert len(reg.trace_) == 3

    def test_unknown_init_rejected(self):
        with pytest.raises(ValueError):
            TskRegressor(init="kmeans").fit(np.zeros((3, 1)), np.zeros(3))

    def test_get_params(self):
        reg = TskRegressor(radius=0.3, epochs=5)
        assert reg.get_params()["radius"] == 0.3
