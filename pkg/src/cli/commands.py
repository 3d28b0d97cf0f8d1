import logging
from pathlib import Path
from typing import Dict, List, Optional

import typer
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

from ..config.run_config import load_run_config, parse_assignments
from ..errors import PalmError
from ..monitoring.performance_tracker import PerformanceTracker
from ..palm.model import SEQUENTIAL, PalmModel
from ..palm.persistence import AnyModel, load_model, model_json
from ..palm.two_stage import GlobalPlusPalmModel
from ..scheduler.worker_pool import WorkerPool
from ..storage.files import staged_outputs, write_rows, write_table
from ..testbed.data import dataset_header, read_dataset, read_inputs, write_dataset
from .scenarios import fit_from_config, generate_data, get_scenario, run_bench

logger = logging.getLogger(__name__)
console = Console()

app = typer.Typer(help="Precision-aggregated local GP models: data, fitting, prediction and benchmarks")

CONFIG_OPTION = typer.Option(None, "--config", help="Flat key=value config file")
SEED_OPTION = typer.Option(None, "--seed", help="Master random seed")
THREADS_OPTION = typer.Option(None, "--threads", help="Worker threads (default: PALM_THREADS or all cores)")
OUT_OPTION = typer.Option(None, "--out", help="Output directory")
SET_OPTION = typer.Option(None, "--set", help="Override a config key, e.g. --set K=40")

FIT_REPORT_HEADER = ["K", "n", "tau2", "eta", "p", "sequential", "wall_time_fit"]


def _overrides(seed: Optional[int], out: Optional[Path], assignments: Optional[List[str]]) -> Dict[str, object]:
    values: Dict[str, object] = dict(parse_assignments(assignments or []))
    if seed is not None:
        values["seed"] = seed
    if out is not None:
        values["out"] = str(out)
    return values


def _fail(action: str, e: Exception) -> None:
    logger.error(f"Error during {action}: {str(e)}")
    console.print(f"[bold red]Error:[/bold red] {str(e)}")
    raise typer.Exit(code=1)


def _summary(model: AnyModel, seconds: float) -> Table:
    palm = model.palm if isinstance(model, GlobalPlusPalmModel) else model
    table = Table(show_header=True, header_style="bold magenta", title="Fitted model")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("kind", "global+palm" if isinstance(model, GlobalPlusPalmModel) else "palm")
    table.add_row("experts (K)", str(palm.K))
    table.add_row("sequential centers", str(palm.center_modes.count(SEQUENTIAL)))
    table.add_row("tau2", f"{palm.tau2:.5g}")
    table.add_row("eta", f"{palm.nugget.eta:.3g}{' (jitter)' if palm.nugget.is_jitter else ''}")
    table.add_row("power p", f"{palm.power_p:.4f}")
    table.add_row("fit time (s)", f"{seconds:.3f}")
    return table


@app.command()
def gen(
    config: Optional[Path] = CONFIG_OPTION,
    seed: Optional[int] = SEED_OPTION,
    out: Optional[Path] = OUT_OPTION,
    set_: Optional[List[str]] = SET_OPTION,
) -> None:
    """Write train.csv and test.csv for the configured test function"""
    try:
        run = load_run_config(config, _overrides(seed, out, set_))
        data = generate_data(run)
        with staged_outputs() as stage:
            write_dataset(run.out_dir / "train.csv", data.train.X, data.train.y, stage=stage)
            write_dataset(run.out_dir / "test.csv", data.X_test, data.y_test, stage=stage)
        console.print(
            f"[green]Wrote {data.train.size} training and {data.X_test.shape[0]} test rows to {run.out_dir}[/green]"
        )
    except (PalmError, ValueError, OSError) as e:
        _fail("gen", e)


@app.command()
def fit(
    train: Path = typer.Argument(..., help="Training CSV with columns x1..xd,y"),
    config: Optional[Path] = CONFIG_OPTION,
    seed: Optional[int] = SEED_OPTION,
    threads: Optional[int] = THREADS_OPTION,
    out: Optional[Path] = OUT_OPTION,
    set_: Optional[List[str]] = SET_OPTION,
) -> None:
    """Fit a model, save it as model.json and write fit_report.csv"""
    try:
        run = load_run_config(config, _overrides(seed, out, set_))
        data = read_dataset(train)
        tracker = PerformanceTracker()
        # one step for the seed model, then one per added center
        steps = run.K - run.K_init + 1 if run.center_mode == "sequential" else None
        with WorkerPool(threads) as pool, Progress(
            SpinnerColumn(), TextColumn("[progress.description]{task.description}"), BarColumn(), transient=True
        ) as progress:
            task = progress.add_task(description=f"Fitting {run.model} with K={run.K}...", total=steps)

            def on_step(m: PalmModel) -> None:
                progress.update(task, advance=1, description=f"[cyan]Fitted {m.K}/{run.K} experts")

            with tracker.track("fit"):
                model = fit_from_config(data, run, pool, on_step=on_step)

        palm = model.palm if isinstance(model, GlobalPlusPalmModel) else model
        report = [
            palm.K,
            run.n,
            palm.tau2,
            palm.nugget.eta,
            palm.power_p,
            palm.center_modes.count(SEQUENTIAL),
            f"{tracker.seconds('fit'):.3f}",
        ]
        with staged_outputs() as stage:
            stage.open(run.out_dir / "model.json").write(model_json(model))
            write_rows(stage.open(run.out_dir / "fit_report.csv"), FIT_REPORT_HEADER, [report])
        logger.info(f"Saved model and fit report to {run.out_dir}")
        console.print(_summary(model, tracker.seconds("fit")))
    except (PalmError, ValueError, OSError) as e:
        _fail("fit", e)


@app.command()
def predict(
    model_file: Path = typer.Argument(..., help="Model file written by fit"),
    inputs: Path = typer.Argument(..., help="CSV whose leading columns are x1..xd"),
    threads: Optional[int] = THREADS_OPTION,
    out: Optional[Path] = typer.Option(None, "--out", help="Output CSV (default: predictions.csv next to the inputs)"),
) -> None:
    """Predictive mean and variance at every input row, in order"""
    try:
        model = load_model(model_file)
        X = read_inputs(inputs, model.dim)
        tracker = PerformanceTracker()
        with WorkerPool(threads) as pool:
            with tracker.track("predict"):
                batch = model.predict(X, pool=pool)
        target = out or inputs.with_name("predictions.csv")
        header = dataset_header(model.dim)[:-1] + ["mean", "variance"]
        write_table(target, header, (list(x) + [m, v] for x, m, v in zip(X, batch.means, batch.variances)))
        logger.info(f"Predicted {X.shape[0]} points in {tracker.seconds('predict'):.3f}s")
        console.print(f"[green]Wrote {X.shape[0]} predictions to {target}[/green]")
    except (PalmError, ValueError, OSError) as e:
        _fail("predict", e)


@app.command()
def bench(
    scenario: str = typer.Argument(..., help="herbie-noisy | herbie-det | glee-seq | michalewicz-3d"),
    config: Optional[Path] = CONFIG_OPTION,
    seed: Optional[int] = SEED_OPTION,
    threads: Optional[int] = THREADS_OPTION,
    out: Optional[Path] = OUT_OPTION,
    set_: Optional[List[str]] = SET_OPTION,
) -> None:
    """Run a benchmark scenario; writes metrics.csv, timings.csv and slice.csv"""
    try:
        chosen = get_scenario(scenario)
        run = load_run_config(config, _overrides(seed, out, set_), defaults=chosen.defaults)
        with WorkerPool(threads) as pool:
            rec = run_bench(chosen, run, pool)

        table = Table(show_header=True, header_style="bold magenta", title=f"Bench: {chosen.name}")
        for column in ["Method", "K", "RMSE", "MAE", "Score", "CVG90"]:
            table.add_column(column)
        for r in rec.metrics:
            table.add_row(r.method, str(r.K), f"{r.rmse:.5f}", f"{r.mae:.5f}", f"{r.score:.3f}", f"{r.coverage_90:.3f}")
        console.print(table)
    except (PalmError, ValueError, OSError) as e:
        _fail("bench", e)
