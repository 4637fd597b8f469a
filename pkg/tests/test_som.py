import numpy as np
import pytest

from sonfis.som import SelfOrganizingMap, SomDiscretizer, export_prototypes


def random_data(seed=0, n=60, d=3):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, d)) * [10.0, 1.0, 100.0] + [5.0, 0.0, 50.0]


class TestTraining:
    def test_single_neuron_is_centroid_after_one_epoch(self):
        X = random_data()
        som = SelfOrganizingMap(shape=(1, 1), epochs=1, sigma0=1.0, seed=0).fit(X)
        Z = (X - som.input_min_) / som.input_range_
        np.testing.assert_allclose(som.prototypes_[0], Z.mean(axis=0), atol=1e-12)

    def test_repeated_row_is_fixed_point(self):
        X = np.tile([2.0, -1.0, 7.0], (25, 1))
        som = SelfOrganizingMap(shape=(2, 3), epochs=20, seed=1).fit(X)
        recovered = som.denormalize(som.prototypes_)
        np.testing.assert_allclose(recovered, np.tile([2.0, -1.0, 7.0], (6, 1)), atol=1e-9)

    def test_batch_fixed_point(self):
        # Once assignments stabilise, the batch update output no longer
        # depends on the current prototypes, so one more epoch at the final
        # radius must reproduce them exactly.
        X = random_data(seed=2)
        som = SelfOrganizingMap(shape=(3, 3), epochs=200, seed=3).fit(X)
        Z = (X - som.input_min_) / som.input_range_
        bmu = ((Z[:, None, :] - som.prototypes_[None, :, :]) ** 2).sum(axis=2).argmin(axis=1)
        grid_d2 = ((som.positions_[:, None, :] - som.positions_[None, :, :]) ** 2).sum(axis=2)
        H = np.exp(-grid_d2 / (2.0 * 0.5 ** 2))
        weights = H[:, bmu]
        updated = (weights @ Z) / weights.sum(axis=1)[:, None]
        np.testing.assert_allclose(updated, som.prototypes_, atol=1e-12)

    def test_paper_scale_grid(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(600, 5))
        som = SelfOrganizingMap(shape=(7, 9), epochs=30, seed=0).fit(X)
        assert som.prototypes_.shape == (63, 5)
        assert som.epochs_trained_ == 30

    def test_determinism(self):
        X = random_data(seed=6)
        a = SelfOrganizingMap(shape=(4, 4), epochs=40, seed=9).fit(X)
        b = SelfOrganizingMap(shape=(4, 4), epochs=40, seed=9).fit(X)
        np.testing.assert_array_equal(a.prototypes_, b.prototypes_)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            SelfOrganizingMap(shape=(2, 2), epochs=0).fit(random_data())
        with pytest.raises(ValueError):
            SelfOrganizingMap(shape=(2, 2), sigma0=-1.0).fit(random_data())
        with pytest.raises(ValueError):
            SelfOrganizingMap().fit(np.empty((0, 3)))
        with pytest.raises(ValueError):
            SelfOrganizingMap().fit([[1.0, np.inf]])


class TestBmu:
    def test_exact_prototype_match(self):
        X = random_data(seed=7)
        som = SelfOrganizingMap(shape=(3, 3), epochs=30, seed=0).fit(X)
        sample = som.denormalize(som.prototypes_)[5]
        assert som.bmu(sample) == 5

    def test_tie_breaks_to_lowest_index(self):
        som = SelfOrganizingMap(shape=(1, 3), epochs=1, seed=0)
        som.fit(np.array([[0.0], [1.0]]))
        # plant an exact tie: two prototypes equidistant from the query
        som.prototypes_ = np.array([[0.9], [0.0], [0.4]])
        assert som.bmu([0.2]) == 1          # equidistant from 0.0 and 0.4
        som.prototypes_ = np.array([[0.0], [0.4], [0.0]])
        assert som.bmu([0.0]) == 0

    def test_out_of_range_sample_still_mapped(self):
        X = random_data(seed=8)
        som = SelfOrganizingMap(shape=(2, 2), epochs=20, seed=0).fit(X)
        far = X.max(axis=0) * 10
        idx = som.predict(far.reshape(1, -1))[0]
        # exhaustive distance scan agrees
        Z = (far - som.input_min_) / som.input_range_
        dists = ((som.prototypes_ - Z) ** 2).sum(axis=1)
        assert idx == int(np.argmin(dists))

    def test_dimension_mismatch(self):
        som = SelfOrganizingMap(shape=(2, 2), epochs=5).fit(random_data())
        with pytest.raises(ValueError, match="dimension"):
            som.predict([[1.0, 2.0]])


class TestGranules:
    def test_single_neuron_granule_is_centroid(self):
        X = random_data(seed=9)
        som = SelfOrganizingMap(shape=(1, 1), epochs=1, seed=0).fit(X)
        g = som.granules(X)
        np.testing.assert_allclose(g, X.mean(axis=0).reshape(1, -1), atol=1e-9)

    def test_unhit_neurons_excluded(self):
        X = np.array([[0.0], [0.01], [1.0], [0.99]])
        som = SelfOrganizingMap(shape=(1, 5), epochs=60, seed=0).fit(X)
        g = som.granules(X)
        assert g.shape[0] == len(np.unique(som.predict(X)))
        assert g.shape[0] < 5

    def test_granules_within_data_envelope(self):
        X = random_data(seed=10)
        som = SelfOrganizingMap(shape=(4, 4), epochs=50, seed=2).fit(X)
        g = som.granules(X)
        lo, hi = X.min(axis=0), X.max(axis=0)
        assert np.all(g >= lo - 1e-9) and np.all(g <= hi + 1e-9)

    def test_prototype_csv_export(self, tmp_path):
        X = random_data(seed=11)
        som = SelfOrganizingMap(shape=(2, 2), epochs=10, seed=0).fit(X)
        path = tmp_path / "protos.csv"
        export_prototypes(som, path, names=["a", "b", "c"])
        lines = path.read_text().splitlines()
        assert lines[0] == "neuron,a,b,c"
        assert len(lines) == 5


class TestDiscretizer:
    def test_single_category(self):
        disc = SomDiscretizer(n_categories=1, epochs=10, seed=0).fit([1.0, 5.0, 9.0])
        np.testing.assert_array_equal(disc.transform([0.0, 4.0, 100.0]), [1, 1, 1])

    def test_extremes_map_to_extreme_categories(self):
        disc = SomDiscretizer(n_categories=5, epochs=100, seed=1).fit(np.arange(100.0))
        cats = disc.transform([0.0, 99.0])
        assert cats[0] == 1
        assert cats[1] == 5

    def test_monotone(self):
        rng = np.random.default_rng(12)
        values = rng.uniform(-50, 50, size=400)
        disc = SomDiscretizer(n_categories=5, epochs=80, seed=2).fit(values)
        cats = disc.transform(np.sort(values))
        assert np.all(np.diff(cats) >= 0)

    def test_levels_sorted_and_cuts_between(self):
        disc = SomDiscretizer(n_categories=4, epochs=80, seed=3).fit(np.linspace(0, 10, 200))
        assert np.all(np.diff(disc.levels_) >= 0)
        assert len(disc.cut_points_) == 3
        for c, lo, hi in zip(disc.cut_points_, disc.levels_[:-1], disc.levels_[1:]):
            assert lo <= c <= hi

    def test_serialisation_round_trip(self):
        disc = SomDiscretizer(n_categories=5, epochs=60, seed=4).fit(np.linspace(0, 1, 97))
        clone = SomDiscretizer.from_dict(disc.to_dict())
        probe = np.linspace(-0.5, 1.5, 101)
        np.testing.assert_array_equal(disc.transform(probe), clone.transform(probe))

    def test_invalid_category_count(self):
        with pytest.raises(ValueError):
            SomDiscretizer(n_categories=0).fit([1.0, 2.0])
