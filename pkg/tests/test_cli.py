import numpy as np
import pytest
from typer.testing import CliRunner

from src.cli.commands import app
from src.storage.files import read_table

runner = CliRunner()

SMALL = ["--set", "train_grid=12", "--set", "test_grid=5", "--set", "n=20", "--set", "n_cand=60"]


def invoke(*args):
    return runner.invoke(app, [str(a) for a in args])


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    result = invoke("gen", "--out", out, "--seed", 3, *SMALL)
    assert result.exit_code == 0, result.output
    return out


def test_gen_writes_grids(tmp_path):
    result = invoke("gen", "--out", tmp_path, "--set", "noise_sd=0.05")
    assert result.exit_code == 0, result.output
    header, train = read_table(tmp_path / "train.csv")
    assert header == ["x1", "x2", "y"] and train.shape == (2500, 3)
    assert read_table(tmp_path / "test.csv")[1].shape == (2601, 3)


def test_gen_is_reproducible(tmp_path):
    for name in ("a", "b"):
        result = invoke("gen", "--out", tmp_path / name, "--seed", 7, "--set", "noise_sd=0.1", "--set", "train_grid=10")
        assert result.exit_code == 0, result.output
    for file in ("train.csv", "test.csv"):
        assert (tmp_path / "a" / file).read_bytes() == (tmp_path / "b" / file).read_bytes()


def test_gen_rejects_unknown_function(tmp_path):
    result = invoke("gen", "--out", tmp_path, "--set", "function=rosenbrock")
    assert result.exit_code == 1
    assert not (tmp_path / "train.csv").exists()


def test_gen_reads_a_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("function = sine\ntrain_grid = 20\ntest_grid = 7\n")
    result = invoke("gen", "--config", cfg, "--out", tmp_path / "out")
    assert result.exit_code == 0, result.output
    header, train = read_table(tmp_path / "out" / "train.csv")
    assert header == ["x1", "y"] and train.shape == (20, 2)


def test_fit_and_predict(small_run, tmp_path):
    out = tmp_path / "fit"
    result = invoke("fit", small_run / "train.csv", "--out", out, "--threads", 2, "--set", "K=1", *SMALL)
    assert result.exit_code == 0, result.output
    header, report = read_table(out / "fit_report.csv")
    assert header == ["K", "n", "tau2", "eta", "p", "sequential", "wall_time_fit"]
    assert report[0, 0] == 1 and report[0, 1] == 20 and report[0, 5] == 0

    result = invoke("predict", out / "model.json", small_run / "test.csv")
    assert result.exit_code == 0, result.output
    header, pred = read_table(small_run / "predictions.csv")
    assert header == ["x1", "x2", "mean", "variance"]
    assert pred.shape == (25, 4)
    _, test = read_table(small_run / "test.csv")
    np.testing.assert_array_equal(pred[:, :2], test[:, :2])
    assert np.all(pred[:, 3] >= 0)


def test_sequential_fit(small_run, tmp_path):
    result = invoke(
        "fit", small_run / "train.csv", "--out", tmp_path, "--threads", 1,
        "--set", "center_mode=sequential", "--set", "K=4", "--set", "K_init=2", "--set", "M_s=2", *SMALL,
    )
    assert result.exit_code == 0, result.output
    _, report = read_table(tmp_path / "fit_report.csv")
    assert report[0, 0] == 4 and report[0, 5] == 2


def test_failed_fit_report_leaves_no_model_file(small_run, tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise OSError("disk full")

    monkeypatch.setattr("src.cli.commands.write_rows", broken)
    out = tmp_path / "fit"
    result = invoke("fit", small_run / "train.csv", "--out", out, "--set", "K=1", *SMALL)
    assert result.exit_code == 1
    assert not (out / "model.json").exists()
    assert list(out.iterdir()) == []


def test_global_plus_palm_fit(small_run, tmp_path):
    result = invoke(
        "fit", small_run / "train.csv", "--out", tmp_path,
        "--set", "model=global+palm", "--set", "K=2", "--set", "m_global=60", *SMALL,
    )
    assert result.exit_code == 0, result.output
    result = invoke("predict", tmp_path / "model.json", small_run / "test.csv", "--out", tmp_path / "p.csv")
    assert result.exit_code == 0, result.output
    assert read_table(tmp_path / "p.csv")[1].shape == (25, 4)


def test_sequential_centers_need_plain_palm(small_run, tmp_path):
    result = invoke(
        "fit", small_run / "train.csv", "--out", tmp_path,
        "--set", "model=global+palm", "--set", "center_mode=sequential", "--set", "K=3", "--set", "K_init=2", *SMALL,
    )
    assert result.exit_code == 1


def test_predict_on_empty_inputs(small_run, tmp_path):
    fit_out = tmp_path / "fit"
    assert invoke("fit", small_run / "train.csv", "--out", fit_out, "--set", "K=1", *SMALL).exit_code == 0
    empty = tmp_path / "empty.csv"
    empty.write_text("x1,x2\n")
    result = invoke("predict", fit_out / "model.json", empty, "--out", tmp_path / "none.csv")
    assert result.exit_code == 0, result.output
    assert (tmp_path / "none.csv").read_text() == "x1,x2,mean,variance\n"


def test_predict_with_missing_model(small_run, tmp_path):
    result = invoke("predict", tmp_path / "absent.json", small_run / "test.csv")
    assert result.exit_code == 1


def test_bench_unknown_scenario(tmp_path):
    assert invoke("bench", "herbie-huge", "--out", tmp_path).exit_code == 1


@pytest.mark.slow
def test_small_bench_is_deterministic(tmp_path):
    args = ["--threads", 1, "--seed", 2, "--set", "K=4", "--set", "slice_points=11", *SMALL]
    for name in ("a", "b"):
        result = invoke("bench", "herbie-det", "--out", tmp_path / name, *args)
        assert result.exit_code == 0, result.output
    for file in ("metrics.csv", "slice.csv"):
        assert (tmp_path / "a" / file).read_bytes() == (tmp_path / "b" / file).read_bytes()

    lines = (tmp_path / "a" / "metrics.csv").read_text().splitlines()
    assert lines[0] == "method,K,rmse,mae,score,coverage_90"
    methods = [line.split(",")[0] for line in lines[1:]]
    assert methods == ["palm", "lagp-transductive", "model-average", "partition"]
    slice_header = (tmp_path / "a" / "slice.csv").read_text().splitlines()[0].split(",")
    assert slice_header[:4] == ["x", "truth", "palm_mean", "palm_variance"]
    assert len((tmp_path / "a" / "slice.csv").read_text().splitlines()) == 12
    assert (tmp_path / "a" / "timings.csv").exists()
