"""Benchmark scenarios: shared data generation, model fitting from a run
config, and the per-scenario method line-ups written out by ``bench``."""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from ..centers.maximin import maximin_centers
from ..centers.sequential import sequential_palm
from ..config.run_config import RunConfig
from ..errors import ConfigurationError
from ..monitoring.performance_tracker import PerformanceTracker
from ..palm.model import PalmModel, fit_palm
from ..palm.persistence import AnyModel
from ..palm.two_stage import fit_global_plus_palm
from ..scheduler.worker_pool import WorkerPool
from ..storage.files import staged_outputs, write_rows
from ..testbed.baselines import (
    baseline_transductive_lagp,
    fit_model_average,
    fit_partition,
    predict_model_average,
    predict_partition,
)
from ..testbed.data import TrainingSet, add_noise, grid_design, shifted_grid_design
from ..testbed.functions import Surface, get_function
from ..testbed.metrics import MetricReport, evaluate

logger = logging.getLogger(__name__)

Moments = Tuple[np.ndarray, np.ndarray]
Predictor = Callable[[np.ndarray], Moments]

SLICE_POINTS = 401
METRICS_HEADER = ["method", "K", "rmse", "mae", "score", "coverage_90"]
TIMINGS_HEADER = ["method", "K", "wall_time_fit", "wall_time_predict"]


class RunSeeds(NamedTuple):
    noise: int
    design: int
    fit: int
    baseline: int


def run_seeds(seed: int) -> RunSeeds:
    """Independent child seeds for each stochastic stage of a run"""
    return RunSeeds(*(int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(4)))


@dataclass(frozen=True)
class ExperimentData:
    surface: Surface
    train: TrainingSet
    X_test: np.ndarray
    y_test: np.ndarray


def generate_data(run: RunConfig) -> ExperimentData:
    """Grid training data (noisy if configured) and a noise-free shifted test grid"""
    surface = get_function(run.function, run.dim)
    seeds = run_seeds(run.seed)
    X = grid_design(run.train_grid, surface.bounds)
    y = add_noise(surface.evaluate(X), run.noise_sd, seed=seeds.noise)
    X_test = shifted_grid_design(run.test_grid, surface.bounds)
    train = TrainingSet.from_arrays(X, y, bounds=surface.bounds)
    logger.info(
        f"{surface.name}: {train.size} training points (sd={run.noise_sd}), {X_test.shape[0]} test points"
    )
    return ExperimentData(surface=surface, train=train, X_test=X_test, y_test=surface.evaluate(X_test))


def fit_from_config(
    train: TrainingSet,
    run: RunConfig,
    pool: WorkerPool,
    center_mode: Optional[str] = None,
    K: Optional[int] = None,
    on_step: Optional[Callable[[PalmModel], None]] = None,
) -> AnyModel:
    """PALM (space-filling or sequential) or Global+PALM, as the run config asks"""
    cfg = run.palm_config()
    center_mode = center_mode or run.center_mode
    K = K or run.K
    seeds = run_seeds(run.seed)

    if center_mode == "sequential":
        if run.model == "global+palm":
            raise ConfigurationError("Sequential center selection is only available for model=palm")
        return sequential_palm(train, min(run.K_init, K), K, cfg, seed=seeds.fit, pool=pool, on_step=on_step)

    centers = maximin_centers(K, train.dim, buffer=True, seed=seeds.design).C
    if run.model == "global+palm":
        return fit_global_plus_palm(train, centers, cfg, seed=seeds.fit, pool=pool)
    model = fit_palm(train, centers, cfg, seed=seeds.fit, pool=pool)
    if on_step:
        on_step(model)
    return model


def model_predictor(model: AnyModel, pool: WorkerPool) -> Predictor:
    def predict(X: np.ndarray) -> Moments:
        batch = model.predict(X, pool=pool)
        return batch.means, batch.variances
    return predict


@dataclass
class BenchRecorder:
    """Collects metrics, timings and slice predictions for one bench run"""

    data: ExperimentData
    X_slice: np.ndarray
    metrics: List[MetricReport] = field(default_factory=list)
    slices: Dict[str, Moments] = field(default_factory=dict)

    def record(self, method: str, K: int, predictor: Predictor, fit_seconds: float = 0.0) -> MetricReport:
        tracker = PerformanceTracker()
        with tracker.track("predict"):
            mean, variance = predictor(self.data.X_test)
        floored = np.maximum(variance, np.finfo(float).tiny)
        if np.any(variance <= 0):
            logger.warning(f"{method}: {int(np.sum(variance <= 0))} nonpositive variances floored for scoring")
        report = evaluate(
            method,
            self.data.y_test,
            mean,
            floored,
            K=K,
            wall_time_fit=round(fit_seconds, 3),
            wall_time_predict=tracker.seconds("predict"),
        )
        self.metrics.append(report)
        self.slices[method] = predictor(self.X_slice)
        logger.info(f"{method} K={K}: rmse={report.rmse:.5g} score={report.score:.4g}")
        return report

    def write(self, out_dir: Path) -> None:
        header = ["x", "truth"]
        columns = [self.X_slice[:, 0], self.data.surface.evaluate(self.X_slice)]
        for method, (mean, variance) in self.slices.items():
            header += [f"{method}_mean", f"{method}_variance"]
            columns += [mean, variance]
        with staged_outputs() as stage:
            write_rows(
                stage.open(out_dir / "metrics.csv"),
                METRICS_HEADER,
                ([r.method, r.K, r.rmse, r.mae, r.score, r.coverage_90] for r in self.metrics),
            )
            write_rows(
                stage.open(out_dir / "timings.csv"),
                TIMINGS_HEADER,
                ([r.method, r.K, f"{r.wall_time_fit:.3f}", f"{r.wall_time_predict:.3f}"] for r in self.metrics),
            )
            write_rows(stage.open(out_dir / "slice.csv"), header, zip(*columns))


def slice_inputs(surface: Surface, fixed: List[float], points: int = SLICE_POINTS) -> np.ndarray:
    """Inputs along the first coordinate with the others held at ``fixed``"""
    lo, hi = surface.bounds[0]
    X = np.empty((points, surface.dim))
    X[:, 0] = np.linspace(lo, hi, points)
    X[:, 1:] = fixed
    return X


def _timed_fit(fit: Callable[[], Predictor]) -> Tuple[Predictor, float]:
    tracker = PerformanceTracker()
    with tracker.track("fit"):
        predictor = fit()
    return predictor, tracker.timings["fit"]


def _palm_and_baselines(rec: BenchRecorder, run: RunConfig, pool: WorkerPool, partition: bool) -> None:
    train = rec.data.train
    cfg = run.palm_config()
    seed = run_seeds(run.seed).baseline

    predictor, seconds = _timed_fit(lambda: model_predictor(fit_from_config(train, run, pool), pool))
    rec.record("palm", run.K, predictor, seconds)

    # fitting happens at prediction time
    rec.record("lagp-transductive", 0, lambda X: baseline_transductive_lagp(train, X, cfg, seed=seed, pool=pool))

    def fit_average() -> Predictor:
        fits = fit_model_average(train, run.K, train.size // run.K, seed=seed, nugget_mode=cfg.nugget_mode, pool=pool)
        return lambda X: predict_model_average(fits, train, X, pool=pool)

    predictor, seconds = _timed_fit(fit_average)
    rec.record("model-average", run.K, predictor, seconds)

    if partition:
        def fit_cells() -> Predictor:
            fits = fit_partition(train, run.K, nugget_mode=cfg.nugget_mode, seed=seed, pool=pool)
            return lambda X: predict_partition(fits, train, X, pool=pool)

        predictor, seconds = _timed_fit(fit_cells)
        rec.record("partition", run.K, predictor, seconds)


def herbie_noisy(rec: BenchRecorder, run: RunConfig, pool: WorkerPool) -> None:
    """Noisy Herbie's tooth: PALM against the transductive local GP and model averaging"""
    _palm_and_baselines(rec, run, pool, partition=False)


def herbie_det(rec: BenchRecorder, run: RunConfig, pool: WorkerPool) -> None:
    """Noise-free Herbie's tooth, adding the regular-partition GP"""
    _palm_and_baselines(rec, run, pool, partition=True)


def _mode_comparison(rec: BenchRecorder, run: RunConfig, pool: WorkerPool, curve: bool) -> None:
    """Space-filling against sequential centers, at every K from K_init when ``curve`` is set"""
    train = rec.data.train
    sizes = range(run.K_init, run.K + 1) if curve else [run.K]
    for K in sizes:
        predictor, seconds = _timed_fit(
            lambda: model_predictor(fit_from_config(train, run, pool, center_mode="spacefill", K=K), pool)
        )
        rec.record("palm-spacefill", K, predictor, seconds)

    # cumulative fit time up to each grown model, excluding time spent recording
    clock = {"start": time.perf_counter(), "recording": 0.0}

    def on_step(model: PalmModel) -> None:
        if not (curve or model.K == run.K):
            return
        fit_seconds = time.perf_counter() - clock["start"] - clock["recording"]
        began = time.perf_counter()
        rec.record("palm-sequential", model.K, model_predictor(model, pool), fit_seconds)
        clock["recording"] += time.perf_counter() - began

    fit_from_config(train, run, pool, center_mode="sequential", on_step=on_step)


def glee_seq(rec: BenchRecorder, run: RunConfig, pool: WorkerPool) -> None:
    """Gramacy-Lee score-versus-K curves for both center modes"""
    _mode_comparison(rec, run, pool, curve=True)


def michalewicz_3d(rec: BenchRecorder, run: RunConfig, pool: WorkerPool) -> None:
    """3d Michalewicz at a single K for both center modes"""
    _mode_comparison(rec, run, pool, curve=False)


@dataclass(frozen=True)
class Scenario:
    name: str
    run: Callable[[BenchRecorder, RunConfig, WorkerPool], None]
    defaults: Dict[str, object]
    slice_fixed: Tuple[float, ...]


SCENARIOS: Dict[str, Scenario] = {
    "herbie-noisy": Scenario(
        "herbie-noisy",
        herbie_noisy,
        {"function": "herbie", "train_grid": 50, "test_grid": 51, "noise_sd": 0.05, "K": 25, "nugget_mode": "mle"},
        (-0.104,),
    ),
    "herbie-det": Scenario(
        "herbie-det",
        herbie_det,
        {"function": "herbie", "train_grid": 50, "test_grid": 51, "noise_sd": 0.0, "K": 25},
        (-0.104,),
    ),
    "glee-seq": Scenario(
        "glee-seq",
        glee_seq,
        {"function": "glee", "train_grid": 60, "test_grid": 61, "noise_sd": 0.01, "K": 15, "K_init": 5, "nugget_mode": "mle"},
        (0.0,),
    ),
    "michalewicz-3d": Scenario(
        "michalewicz-3d",
        michalewicz_3d,
        {"function": "michalewicz", "dim": 3, "train_grid": 15, "test_grid": 16, "noise_sd": 0.05, "K": 20, "K_init": 5, "nugget_mode": "mle"},
        (np.pi / 2, np.pi / 2),
    ),
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ConfigurationError(f"Unknown scenario '{name}'; choose from {sorted(SCENARIOS)}") from None


def run_bench(scenario: Scenario, run: RunConfig, pool: WorkerPool) -> BenchRecorder:
    """Run one scenario and write metrics.csv, timings.csv and slice.csv under run.out"""
    data = generate_data(run)
    rec = BenchRecorder(data=data, X_slice=slice_inputs(data.surface, list(scenario.slice_fixed), run.slice_points))
    scenario.run(rec, run, pool)
    rec.write(run.out_dir)
    logger.info(f"Bench {scenario.name}: {len(rec.metrics)} metric rows written to {run.out_dir}")
    return rec
