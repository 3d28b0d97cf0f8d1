import numpy as np
import pytest
from pydantic import ValidationError
from scipy.spatial.distance import cdist

from src.errors import DegenerateDataError, DimensionError
from src.gp.core import gp_predict_many
from src.storage.files import staged_outputs
from src.testbed.baselines import (
    baseline_model_average,
    baseline_transductive_lagp,
    fit_partition,
    partition_cells,
    predict_partition,
)
from src.testbed.data import (
    TrainingSet,
    add_noise,
    grid_design,
    read_dataset,
    read_inputs,
    shifted_grid_design,
    write_dataset,
)
from src.testbed.functions import (
    FUNCTIONS,
    HERBIE_BOUNDS,
    get_function,
    gramacy_lee_2d,
    herbie_factor,
    herbies_tooth,
    michalewicz,
    sine_wave,
)
from src.testbed.metrics import MetricReport, coverage, evaluate, mae, rmse, score


class TestFunctions:
    def test_herbie_at_origin(self):
        assert herbies_tooth(np.zeros(2)) == pytest.approx(-0.610494, abs=1e-5)

    def test_gramacy_lee(self):
        assert gramacy_lee_2d(np.array([1.0, 0.0])) == pytest.approx(np.exp(-1.0))
        assert gramacy_lee_2d(np.zeros(2)) == 0.0
        with pytest.raises(ValueError):
            gramacy_lee_2d(np.zeros(3))

    def test_michalewicz_minimum_in_two_dimensions(self):
        # the function is a sum of per-coordinate terms, so its minimum is the sum of 1d minima
        t = np.linspace(0.0, np.pi, 200_001)
        first = np.min(-np.sin(t) * np.sin(t**2 / np.pi) ** 20)
        second = np.min(-np.sin(t) * np.sin(2 * t**2 / np.pi) ** 20)
        assert first + second == pytest.approx(-1.8013, abs=1e-4)
        assert michalewicz(np.array([2.20290552, 1.57079633])) == pytest.approx(-1.8013, abs=1e-4)

    def test_batch_and_point_agree(self, rng):
        X = rng.uniform(-2, 2, size=(5, 2))
        batch = herbies_tooth(X)
        assert batch.shape == (5,)
        assert batch[3] == herbies_tooth(X[3])
        assert np.all(herbies_tooth(X) == -herbie_factor(X[:, 0]) * herbie_factor(X[:, 1]))

    def test_sine(self):
        assert sine_wave(np.pi / 2) == pytest.approx(1.0)
        np.testing.assert_allclose(sine_wave(np.array([[0.0], [np.pi]])), [0.0, 0.0], atol=1e-15)

    def test_registry(self):
        assert set(FUNCTIONS) == {"herbie", "glee", "michalewicz", "sine"}
        surface = get_function("michalewicz", dim=5)
        assert surface.dim == 5 and len(surface.bounds) == 5
        assert surface.evaluate(np.full(5, 1.0)).shape == (1,)
        with pytest.raises(ValueError):
            get_function("herbie", dim=3)
        with pytest.raises(ValueError, match="Unknown"):
            get_function("rosenbrock")


class TestData:
    def test_grid_sizes_and_corners(self):
        X = grid_design(50, HERBIE_BOUNDS)
        assert X.shape == (2500, 2)
        np.testing.assert_array_equal(X[0], [-2.0, -2.0])
        np.testing.assert_array_equal(X[-1], [2.0, 2.0])
        # first dimension varies slowest
        assert X[1, 0] == -2.0 and X[1, 1] > -2.0

    def test_shifted_grid_avoids_training_grid(self):
        train = grid_design(50, HERBIE_BOUNDS)
        test = shifted_grid_design(51, HERBIE_BOUNDS)
        assert test.shape == (2601, 2)
        assert cdist(test, train).min() > 1e-6
        assert np.all((test > -2.0) & (test < 2.0))

    def test_grid_needs_two_points(self):
        with pytest.raises(ValueError):
            grid_design(1, HERBIE_BOUNDS)

    def test_noise_is_seeded(self):
        y = np.zeros(1000)
        a, b = add_noise(y, 0.5, seed=1), add_noise(y, 0.5, seed=1)
        np.testing.assert_array_equal(a, b)
        assert np.std(a) == pytest.approx(0.5, rel=0.1)
        assert not np.array_equal(a, add_noise(y, 0.5, seed=2))
        np.testing.assert_array_equal(add_noise(y, 0.0, seed=1), y)
        with pytest.raises(ValueError):
            add_noise(y, -1.0, seed=1)

    def test_training_set_codes_inputs(self):
        data = TrainingSet.from_arrays(np.array([[-2.0, 0.0], [2.0, 1.0]]), np.array([1.0, 2.0]), bounds=HERBIE_BOUNDS)
        np.testing.assert_allclose(data.coded_X, [[0.0, 0.5], [1.0, 0.75]])
        with pytest.raises(DimensionError):
            TrainingSet.from_arrays(np.zeros((3, 2)), np.zeros(2))

    def test_dataset_files(self, tmp_path):
        X = grid_design(3, HERBIE_BOUNDS)
        y = herbies_tooth(X)
        path = tmp_path / "train.csv"
        write_dataset(path, X, y)
        assert path.read_text().splitlines()[0] == "x1,x2,y"
        data = read_dataset(path, bounds=HERBIE_BOUNDS)
        np.testing.assert_array_equal(data.X, X)
        np.testing.assert_array_equal(data.y, y)
        np.testing.assert_array_equal(read_inputs(path, 2), X)

    def test_staged_files_land_together(self, tmp_path):
        with staged_outputs() as stage:
            stage.open(tmp_path / "a.txt").write("a")
            write_dataset(tmp_path / "b.csv", np.zeros((1, 1)), [1.0], stage=stage)
            assert not (tmp_path / "a.txt").exists()
        assert (tmp_path / "a.txt").read_text() == "a"
        assert (tmp_path / "b.csv").read_text() == "x1,y\n0.0,1.0\n"

        with pytest.raises(RuntimeError):
            with staged_outputs() as stage:
                stage.open(tmp_path / "c.txt").write("c")
                raise RuntimeError("interrupted")
        assert sorted(p.name for p in tmp_path.iterdir()) == ["a.txt", "b.csv"]


class TestMetrics:
    def test_point_accuracy(self):
        y, mu = np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 5.0])
        assert rmse(y, mu) == pytest.approx(np.sqrt(4 / 3))
        assert mae(y, mu) == pytest.approx(2 / 3)
        with pytest.raises(ValueError):
            rmse(y, mu[:2])

    def test_score(self):
        y = np.array([0.0, 1.0])
        assert score(y, y, np.ones(2)) == 0.0
        assert score(y, y + 1.0, np.full(2, np.e)) == pytest.approx(-1.0 / np.e - 1.0)
        with pytest.raises(ValueError):
            score(y, y, np.array([1.0, 0.0]))

    def test_coverage(self):
        y = np.zeros(4)
        mu = np.array([0.0, 1.0, 2.0, -1.5])
        # the 90% half width at unit variance is about 1.645
        assert coverage(y, mu, np.ones(4)) == 0.75
        assert coverage(y, mu, np.ones(4), level=0.0) == 0.25
        with pytest.raises(ValueError):
            coverage(y, mu, np.ones(4), level=1.0)

    def test_report(self):
        y = np.array([0.0, 1.0, 2.0])
        report = evaluate("palm", y, y, np.ones(3), K=25, wall_time_fit=1.5)
        assert report.rmse == 0.0 and report.coverage_90 == 1.0 and report.K == 25
        with pytest.raises(ValidationError):
            MetricReport(method="x", rmse=-1.0, mae=0.0, score=0.0, coverage_90=0.5)


class TestBaselines:
    def test_partition_cells(self):
        U = np.array([[0.0, 0.0], [0.99, 0.0], [1.0, 1.0], [0.5, 0.25]])
        np.testing.assert_array_equal(partition_cells(U, 2), [0, 2, 3, 2])

    def test_partition_uses_the_cell_gp(self, herbie_data):
        fits = fit_partition(herbie_data, 4)
        assert len(fits) == 4 and all(f.size == 64 for f in fits)
        X = np.array([[-1.0, -1.0], [1.0, -1.0], [1.5, 1.5]])
        pred = predict_partition(fits, herbie_data, X)
        for row, cell in zip(range(3), (0, 2, 3)):
            # same batch as the partition predictor, so only the blend can differ
            mean, var = gp_predict_many(fits[cell], herbie_data.coding.encode(X))
            assert pred.means[row] == pytest.approx(mean[row], rel=1e-9, abs=1e-12)
            assert pred.variances[row] == pytest.approx(var[row], rel=1e-9, abs=1e-12)

    def test_partition_jumps_at_cell_boundaries(self, herbie_data):
        fits = fit_partition(herbie_data, 4)
        x1 = np.linspace(-0.5, 0.5, 1001)
        means = predict_partition(fits, herbie_data, np.column_stack([x1, np.full_like(x1, -1.0)])).means
        second = np.abs(np.diff(means, 2))
        # x1 = 0 is the shared cell edge
        edge = np.arange(497, 501)
        assert second[edge].max() > 10 * np.delete(second, edge).max()

    def test_partition_needs_square_counts_and_full_cells(self, herbie_data):
        with pytest.raises(ValueError):
            fit_partition(herbie_data, 3)
        corner = herbie_data.subset(np.flatnonzero(np.all(herbie_data.coded_X < 0.4, axis=1)))
        with pytest.raises(DegenerateDataError):
            fit_partition(corner, 4)

    def test_model_average(self, herbie_data):
        X = shifted_grid_design(5, HERBIE_BOUNDS)
        pred = baseline_model_average(herbie_data, 4, 50, X, seed=3)
        assert pred.means.shape == (25,) and np.all(pred.variances >= 0)
        assert np.all(np.isfinite(pred.means))
        with pytest.raises(ValueError):
            baseline_model_average(herbie_data, 6, 50, X)
        empty = baseline_model_average(herbie_data, 2, 20, np.empty((0, 2)))
        assert empty.means.shape == (0,)

    def test_transductive_local_gp(self, herbie_data, small_cfg):
        X = np.array([[0.1, 0.2], [-1.3, 0.9], [1.2, -0.7]])
        pred = baseline_transductive_lagp(herbie_data, X, small_cfg, seed=1)
        assert pred.means.shape == (3,) and np.all(pred.variances >= 0)
        assert np.max(np.abs(pred.means - herbies_tooth(X))) < 0.2
        assert baseline_transductive_lagp(herbie_data, np.empty((0, 2)), small_cfg).means.shape == (0,)
