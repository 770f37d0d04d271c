"""
Simulation lab: embedded experiment presets, uniform-pruning sweeps,
random instance generation and robustness batches.
"""

import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import binomtest

from accuracy_oracle import AccuracyModel, SyntheticAccuracy, build_accuracy_model
from cluster import MAX_PRUNING, ClusterSpec, Hyperparams, make_cluster
from cost_models import model_size
from errors import ConfigError, InfeasibleCap
from pipeline import OptimizationReport, SolutionPath, optimize
from soga import penalty

logger = logging.getLogger(__name__)

BASE_MODEL_SIZE_MB = 506.8
BASE_ACCURACY = 0.85
# Per-view salience in percent, views 0..11.
IMPORTANCE_PERCENT = (7.2, 10.5, 7.9, 7.7, 7.8, 8.6, 9.1, 8.7, 8.6, 7.6, 8.3, 7.9)


@dataclass(frozen=True)
class ExperimentPreset:
    id: str
    perf: Tuple[float, ...]
    caps_mb: Tuple[float, ...]
    min_accuracy: float
    description: str = ""

    def cluster(self) -> ClusterSpec:
        return make_cluster(
            perf=self.perf,
            caps=self.caps_mb,
            base_model_size_mb=BASE_MODEL_SIZE_MB,
            base_accuracy=BASE_ACCURACY,
            min_accuracy=self.min_accuracy,
            importance=IMPORTANCE_PERCENT,
            name=self.id,
        )


PRESETS: Dict[str, ExperimentPreset] = {
    p.id: p
    for p in (
        ExperimentPreset(
            "exp1",
            (0.28, 0.73, 0.04, 0.89, 0.11, 0.07, 0.83, 0.07, 0.07, 0.06, 0.37, 0.34),
            (253.93, 279.01, 285.67, 111.87, 279.54, 154.85, 355.08, 388.48, 404.61, 125.29, 381.24, 398.47),
            0.831,
            "heterogeneous devices, random caps, 83.1% floor",
        ),
        ExperimentPreset(
            "exp2",
            (0.052, 0.052, 0.104, 0.067, 0.067, 0.104, 0.104, 0.104, 0.067, 0.067, 0.104, 0.104),
            (128, 128, 256, 512, 512, 256, 256, 256, 512, 512, 256, 256),
            0.80,
            "single-board computers, caps at half the RAM, 80% floor",
        ),
        ExperimentPreset(
            "exp3",
            (0.89, 0.11, 0.88, 0.61, 0.71, 0.55, 0.46, 0.67, 0.74, 0.29, 0.66, 0.59),
            (143.6, 434.5, 334.5, 100.5, 444.6, 181.2, 366.1, 215.5, 266.4, 279.2, 173.4, 411.4),
            0.85,
            "heterogeneous devices, 85% floor",
        ),
        ExperimentPreset(
            "exp4",
            (0.10, 0.10, 0.05, 0.05, 0.05, 0.10, 0.10, 0.10, 0.07, 0.07, 0.10, 0.10),
            (256, 256, 128, 128, 128, 256, 256, 256, 512, 512, 256, 256),
            0.85,
            "single-board computers, 85% floor",
        ),
        ExperimentPreset(
            "exp5",
            (0.02, 0.03, 0.33, 0.81, 0.49, 0.21, 0.18, 0.46, 0.08, 0.71, 0.86, 0.48),
            (405.4, 343.1, 242.6, 119.3, 273.9, 436.3, 103.8, 246.4, 396.2, 356.4, 111.1, 297.2),
            0.84,
            "heterogeneous devices, 84% floor",
        ),
    )
}


def list_presets() -> List[ExperimentPreset]:
    return [PRESETS[k] for k in sorted(PRESETS)]


def preset_cluster(preset_id: str) -> ClusterSpec:
    """
    Raises:
        ConfigError: unknown preset id.
    """
    try:
        return PRESETS[preset_id].cluster()
    except KeyError:
        raise ConfigError(
            f"unknown preset '{preset_id}' (known: {', '.join(sorted(PRESETS))})", field="preset"
        ) from None


def run_preset(
    preset_id: str, model: Optional[AccuracyModel] = None, hyper: Optional[Hyperparams] = None
) -> OptimizationReport:
    """Optimize a preset; the synthetic model over the preset's importance by default."""
    cluster = preset_cluster(preset_id)
    return optimize(cluster, model or SyntheticAccuracy.for_cluster(cluster), hyper)


@dataclass(frozen=True)
class SweepRow:
    level: float
    accuracy: float
    size_mb: float
    latency_norm: float


def sweep_uniform(model: AccuracyModel, grid: Sequence[float], cluster: ClusterSpec) -> List[SweepRow]:
    """
    Evaluate uniform pruning at every grid level.

    Latency is min-max normalized over the grid; with a single distinct
    level it is reported relative to the unpruned deployment instead.
    """
    levels = np.asarray(grid, dtype=float)
    X = np.repeat(levels[:, None], cluster.n_views, axis=1)
    acc = model.evaluate_batch(X)
    sizes = model_size(levels, cluster.base_model_size_mb)
    raw = cluster.base_time_units * (1.0 - X) / cluster.perf
    bottleneck = raw.max(axis=1)
    span = bottleneck.max() - bottleneck.min()
    if np.unique(levels).size >= 2 and span > 0:
        norm = (bottleneck - bottleneck.min()) / span
    else:
        norm = bottleneck / (cluster.base_time_units / cluster.perf.min())
    return [
        SweepRow(float(l), float(a), float(s), float(t))
        for l, a, s, t in zip(levels, acc, np.atleast_1d(sizes), norm)
    ]


@dataclass(frozen=True)
class RandomInstanceSpec:
    """Distribution of random instances for robustness batches."""

    n_views: int = 12
    accuracy_beta: Tuple[float, float] = (5.0, 2.0)
    cap_beta: Tuple[float, float] = (2.0, 2.0)
    perf_range: Tuple[float, float] = (0.05, 1.0)
    base_model_size_mb: float = BASE_MODEL_SIZE_MB
    base_accuracy: float = BASE_ACCURACY
    homogeneous: bool = False
    seed: int = 0


def instance_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def random_instance(spec: RandomInstanceSpec, index: int) -> ClusterSpec:
    """
    Draw instance `index` of the batch.

    Floors are base_accuracy * Beta(accuracy_beta), caps base_size *
    Beta(cap_beta), perf uniform over perf_range. Homogeneous instances use
    one perf and one cap for every device.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, index]))
    V = spec.n_views
    draws = 1 if spec.homogeneous else V
    min_acc = spec.base_accuracy * rng.beta(*spec.accuracy_beta)
    caps = spec.base_model_size_mb * rng.beta(*spec.cap_beta, size=draws)
    caps = np.maximum(caps, 1e-9 * spec.base_model_size_mb)
    perf = rng.uniform(*spec.perf_range, size=draws)
    if spec.homogeneous:
        caps, perf = np.repeat(caps, V), np.repeat(perf, V)
    importance = IMPORTANCE_PERCENT if V == len(IMPORTANCE_PERCENT) else None
    return make_cluster(
        perf=perf.tolist(),
        caps=caps.tolist(),
        base_model_size_mb=spec.base_model_size_mb,
        base_accuracy=spec.base_accuracy,
        min_accuracy=float(min_acc),
        importance=importance,
        name=f"random-{spec.seed}-{index}",
    )


@dataclass(frozen=True)
class BatchRow:
    instance: int
    seed: int
    path: str
    feasible: bool
    speedup: float
    violations: int
    p_min_feasible: bool = False

    @property
    def solved(self) -> bool:
        if self.path == "error":
            return False
        return self.path != SolutionPath.MIN_PRUNING_FALLBACK.value or self.p_min_feasible


@dataclass(frozen=True)
class BatchSummary:
    n: int
    solved: int
    solved_rate: float
    ci_low: float
    ci_high: float
    path_histogram: Dict[str, int]
    mean_violations: float
    max_violations: int
    rows: Tuple[BatchRow, ...] = field(repr=False, default=())

    @property
    def unsolved(self) -> int:
        return self.n - self.solved

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "solved": self.solved,
            "unsolved": self.unsolved,
            "solved_rate": self.solved_rate,
            "ci95": [self.ci_low, self.ci_high],
            "path_histogram": dict(sorted(self.path_histogram.items())),
            "mean_violations": self.mean_violations,
            "max_violations": self.max_violations,
        }


def _run_instance(args: Tuple[RandomInstanceSpec, int, str, Hyperparams]) -> BatchRow:
    spec, index, selector, hyper = args
    seed = instance_seed(spec.seed, index)
    cluster = random_instance(spec, index)
    try:
        model = build_accuracy_model(selector, cluster, seed=seed)
        report = optimize(cluster, model, replace(hyper, seed=seed))
    except InfeasibleCap as e:
        logger.warning(f"Instance {index} unsolvable: {e}")
        unreachable = int(np.sum(cluster.caps < cluster.base_sizes * (1.0 - MAX_PRUNING)))
        return BatchRow(index, seed, "error", False, float("nan"), unreachable)
    floor = penalty(report.allocation.p_min, cluster, model, hyper.phi)
    return BatchRow(
        index, seed, report.path.value, report.feasible, report.speedup, report.violations,
        p_min_feasible=floor.total <= 0,
    )


def summarize(rows: Sequence[BatchRow]) -> BatchSummary:
    n = len(rows)
    solved = sum(1 for r in rows if r.solved)
    ci = binomtest(solved, n).proportion_ci(confidence_level=0.95, method="wilson")
    violations = np.array([r.violations for r in rows], dtype=float)
    return BatchSummary(
        n=n,
        solved=solved,
        solved_rate=solved / n,
        ci_low=float(ci.low),
        ci_high=float(ci.high),
        path_histogram=dict(Counter(r.path for r in rows)),
        mean_violations=float(violations.mean()),
        max_violations=int(violations.max()),
        rows=tuple(rows),
    )


def robustness_batch(
    spec: RandomInstanceSpec,
    n: int,
    model: str = "synthetic",
    hyper: Optional[Hyperparams] = None,
    workers: int = 1,
) -> BatchSummary:
    """
    Optimize n random instances and summarize how many were solved.

    Args:
        spec: instance distribution, including the batch seed
        n: number of instances
        model: accuracy-model selector built per instance
        hyper: search settings; each instance gets its own derived seed
        workers: process count; results match the serial run

    Returns:
        BatchSummary with a Wilson 95% interval on the solved rate.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    hyper = hyper or Hyperparams()
    jobs = [(spec, i, model, hyper) for i in range(n)]
    logger.info(f"Running robustness batch of {n} instances with {workers} worker(s)")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_instance, jobs, chunksize=max(1, n // (4 * workers))))
    else:
        rows = [_run_instance(job) for job in jobs]
    summary = summarize(rows)
    logger.info(
        f"Solved {summary.solved}/{n} ({summary.solved_rate:.3f}, "
        f"95% CI {summary.ci_low:.3f}-{summary.ci_high:.3f})"
    )
    return summary
