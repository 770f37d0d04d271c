#!/usr/bin/env python3
"""
SlimEdge command line.

Subcommands: optimize, sweep, batch, importance, presets. Results go to CSV
and JSON files under --out; logs go to stderr.

Exit codes: 0 feasible, 2 fallback with constraint violations, 1 error.
"""

import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import typer
from dotenv import load_dotenv

from accuracy_oracle import build_accuracy_model, view_importance
from cluster import ClusterSpec, Hyperparams, make_cluster, validate_cluster
from errors import ConfigError, SlimEdgeError
from pipeline import format_report_table, optimize
from report_io import OutputMeta, config_hash, write_batch, write_importance, write_report, write_sweep
from simlab import BASE_ACCURACY, BASE_MODEL_SIZE_MB, RandomInstanceSpec, list_presets, preset_cluster, robustness_batch, sweep_uniform

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATIONS = 2
DEFAULT_GRID = "0:0.98:0.02"

app = typer.Typer(
    name="slimedge",
    help="Importance-aware pruning optimizer for multi-view models on edge devices.",
    no_args_is_help=True,
    add_completion=False,
)


@dataclass
class RunConfig:
    """Resolved configuration of one command; hashed into every output."""

    command: str
    cluster: Optional[str] = None
    model: str = "synthetic"
    seed: int = 0
    hyper: Dict[str, str] = field(default_factory=dict)
    grid: Optional[str] = None
    n: Optional[int] = None
    views: Optional[int] = None
    homogeneous: bool = False
    probes: Optional[int] = None
    out: Path = Path("results")

    def hashable(self) -> dict:
        data = asdict(self)
        data.pop("out")
        return data

    def meta(self) -> OutputMeta:
        return OutputMeta(config_hash=config_hash(self.hashable()), seed=self.seed)


def configure_logging(verbose: bool = False) -> None:
    level_name = "DEBUG" if verbose else os.environ.get("SLIMEDGE_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    logging.getLogger().setLevel(getattr(logging, level_name, logging.INFO))


def parse_hyper(pairs: Optional[List[str]]) -> Dict[str, str]:
    """
    Parse repeated --hyper key=val flags.

    Raises:
        ConfigError: an entry without '='.
    """
    out: Dict[str, str] = {}
    for i, pair in enumerate(pairs or []):
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"expected key=val, got '{pair}'", source="--hyper", column=i + 1, field="hyper")
        out[key.strip()] = value.strip()
    return out


def parse_grid(text: str) -> np.ndarray:
    """
    Inclusive start:stop:step grid, e.g. 0:0.98:0.02 gives 50 levels.

    Raises:
        ConfigError: malformed text or levels outside [0, 0.99].
    """
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"expected start:stop:step, got '{text}'", source="--grid", field="grid") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"empty or descending grid '{text}'", source="--grid", field="grid")
    count = int(round((stop - start) / step)) + 1
    levels = np.round(start + step * np.arange(count), 12)
    if levels[0] < 0 or levels[-1] > 0.99:
        raise ConfigError(f"grid '{text}' leaves [0, 0.99]", source="--grid", field="grid")
    return levels


def load_cluster_file(path: Path) -> ClusterSpec:
    """
    Read and strictly validate a cluster JSON file.

    Raises:
        ConfigError: missing file, bad JSON or a missing field.
        ClusterValidationError: the cluster breaks an invariant.
    """
    if not path.is_file():
        raise ConfigError("cluster file not found", source=str(path))
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, source=str(path), line=e.lineno, column=e.colno) from None
    try:
        cluster = ClusterSpec.from_dict(data)
    except KeyError as e:
        raise ConfigError("missing required field", source=str(path), field=str(e.args[0])) from None
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), source=str(path)) from None
    return validate_cluster(cluster)


def resolve_cluster(preset: Optional[str], cluster_file: Optional[Path]) -> Tuple[ClusterSpec, str]:
    if preset and cluster_file:
        raise ConfigError("give either --preset or --cluster, not both", field="cluster")
    if cluster_file:
        return load_cluster_file(cluster_file), str(cluster_file)
    if preset:
        return validate_cluster(preset_cluster(preset)), preset
    raise ConfigError("one of --preset or --cluster is required", field="cluster")


def uniform_views_cluster(n_views: int) -> ClusterSpec:
    """Unconstrained cluster with uniform importance, for importance runs without a cluster."""
    return make_cluster(
        perf=[1.0] * n_views,
        caps=[float("inf")] * n_views,
        base_model_size_mb=BASE_MODEL_SIZE_MB,
        base_accuracy=BASE_ACCURACY,
        min_accuracy=0.0,
        name=f"uniform-{n_views}",
    )


def _fail(error: Exception) -> None:
    logger.error(str(error))
    typer.echo(f"error: {error}", err=True)
    raise typer.Exit(EXIT_ERROR)


SeedOption = typer.Option(0, "--seed", envvar="SLIMEDGE_SEED", help="RNG seed (env SLIMEDGE_SEED)")
OutOption = typer.Option(Path("results"), "--out", help="Output directory")
ModelOption = typer.Option("synthetic", "--model", help="synthetic | feature-bank | surrogate:<dataset.csv>")
HyperOption = typer.Option(None, "--hyper", help="Hyperparameter override key=val (repeatable)")


@app.callback()
def main_callback(verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging")):
    load_dotenv()
    configure_logging(verbose)


@app.command("optimize")
def cmd_optimize(
    preset: Optional[str] = typer.Option(None, "--preset", help="Embedded preset id (exp1..exp5)"),
    cluster: Optional[Path] = typer.Option(None, "--cluster", help="Cluster JSON file"),
    seed: int = SeedOption,
    out: Path = OutOption,
    model: str = ModelOption,
    hyper: Optional[List[str]] = HyperOption,
    grid: Optional[str] = typer.Option(None, "--grid", help="Restrict the search to start:stop:step levels"),
):
    """Optimize one cluster and write report.json, front.csv and generations.csv."""
    try:
        spec, source = resolve_cluster(preset, cluster)
        overrides = parse_hyper(hyper)
        config = RunConfig("optimize", cluster=source, model=model, seed=seed, hyper=overrides, grid=grid, out=out)
        params = Hyperparams().with_overrides({**overrides, "seed": seed})
        levels = parse_grid(grid) if grid else None
        report = optimize(spec, build_accuracy_model(model, spec, seed), params, grid=levels)
        write_report(report, out, config.meta())
    except (SlimEdgeError, OSError) as e:
        _fail(e)
    typer.echo(format_report_table(report))
    raise typer.Exit(EXIT_OK if report.feasible else EXIT_VIOLATIONS)


@app.command("sweep")
def cmd_sweep(
    preset: Optional[str] = typer.Option(None, "--preset", help="Preset supplying base size and devices (default exp1)"),
    cluster: Optional[Path] = typer.Option(None, "--cluster", help="Cluster JSON file"),
    grid: str = typer.Option(DEFAULT_GRID, "--grid", help="Inclusive start:stop:step"),
    seed: int = SeedOption,
    out: Path = OutOption,
    model: str = ModelOption,
):
    """Uniform-pruning sweep: accuracy, size and normalized latency per level."""
    try:
        spec, source = resolve_cluster(preset or (None if cluster else "exp1"), cluster)
        config = RunConfig("sweep", cluster=source, model=model, seed=seed, grid=grid, out=out)
        rows = sweep_uniform(build_accuracy_model(model, spec, seed), parse_grid(grid), spec)
        path = write_sweep(rows, out / "sweep.csv", config.meta())
    except (SlimEdgeError, OSError) as e:
        _fail(e)
    typer.echo(f"{len(rows)} levels written to {path}")


@app.command("batch")
def cmd_batch(
    n: int = typer.Option(100, "--n", min=1, help="Number of random instances"),
    seed: int = SeedOption,
    out: Path = OutOption,
    model: str = ModelOption,
    hyper: Optional[List[str]] = HyperOption,
    views: int = typer.Option(12, "--views", min=1, help="Views per instance"),
    homogeneous: bool = typer.Option(False, "--homogeneous", help="Identical devices within an instance"),
    workers: int = typer.Option(1, "--workers", min=1, help="Worker processes"),
):
    """Robustness batch over random instances: batch.csv and summary.json."""
    try:
        overrides = parse_hyper(hyper)
        config = RunConfig("batch", model=model, seed=seed, hyper=overrides, n=n, views=views,
                           homogeneous=homogeneous, out=out)
        params = Hyperparams().with_overrides(overrides)
        spec = RandomInstanceSpec(n_views=views, homogeneous=homogeneous, seed=seed)
        summary = robustness_batch(spec, n, model=model, hyper=params, workers=workers)
        write_batch(summary, out, config.meta())
    except (SlimEdgeError, OSError) as e:
        _fail(e)
    typer.echo(
        f"solved {summary.solved}/{summary.n} "
        f"(rate {summary.solved_rate:.3f}, 95% CI {summary.ci_low:.3f}-{summary.ci_high:.3f})"
    )


@app.command("importance")
def cmd_importance(
    preset: Optional[str] = typer.Option(None, "--preset", help="Preset id"),
    cluster: Optional[Path] = typer.Option(None, "--cluster", help="Cluster JSON file"),
    views: int = typer.Option(12, "--views", min=1, help="View count when no cluster is given"),
    probes: int = typer.Option(2000, "--probes", min=100, help="Permutation probes"),
    seed: int = SeedOption,
    out: Path = OutOption,
    model: str = ModelOption,
):
    """Permutation view importance of an accuracy model: importance.csv."""
    try:
        if preset or cluster:
            spec, source = resolve_cluster(preset, cluster)
        else:
            spec, source = uniform_views_cluster(views), f"uniform-{views}"
        config = RunConfig("importance", cluster=source, model=model, seed=seed, views=spec.n_views,
                           probes=probes, out=out)
        scores = view_importance(build_accuracy_model(model, spec, seed), n_probes=probes, seed=seed)
        path = write_importance(scores, out / "importance.csv", config.meta())
    except (SlimEdgeError, OSError) as e:
        _fail(e)
    for v, s in enumerate(scores):
        typer.echo(f"view {v:>2}: {s:.4f}")
    logger.info(f"Importance written to {path}")


@app.command("presets")
def cmd_presets():
    """List the embedded experiment presets."""
    for p in list_presets():
        typer.echo(f"{p.id}: A_min={p.min_accuracy} views={len(p.perf)}  {p.description}")
        typer.echo(f"  perf: {', '.join(repr(x) for x in p.perf)}")
        typer.echo(f"  caps_mb: {', '.join(repr(float(x)) for x in p.caps_mb)}")


def main():
    """Console entry point."""
    load_dotenv()
    app()


if __name__ == "__main__":
    main()
