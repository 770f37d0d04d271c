"""
End-to-end optimization with a guaranteed answer.

allocate -> sample -> NSGA-II -> GA fallback -> minimum-pruning fallback.
Once the minimum pruning vector exists a report is always produced.
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from allocation import AllocationResult, allocate
from cluster import ClusterSpec, Hyperparams, PruningVector, validate_cluster
from cost_models import baseline_time, latency, view_sizes
from errors import InfeasibleCap, OutOfRangePruning
from fitness import FitnessBreakdown, total_fitness
from nsga2 import ConstraintPair, GenerationRecord, ParetoFront, evaluate_objectives, nsga2_run, select_deployment
from sampler import sample_population
from soga import PenaltyValue, ga_run, penalty

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1


class SolutionPath(str, Enum):
    NSGA2 = "nsga2"
    GA_FALLBACK = "ga_fallback"
    MIN_PRUNING_FALLBACK = "min_pruning_fallback"
    UNIFORM_BASELINE = "uniform_baseline"


@dataclass(frozen=True)
class OptimizationReport:
    """Outcome of one optimization, re-derivable from `chosen` alone."""

    cluster_name: str
    chosen: PruningVector
    path: SolutionPath
    front: ParetoFront
    sizes_mb: Tuple[float, ...]
    latencies: Tuple[float, ...]
    accuracy: float
    speedup: float
    violations: int
    constraints: ConstraintPair
    penalty: PenaltyValue
    fitness: FitnessBreakdown
    allocation: Optional[AllocationResult] = None
    generations: Tuple[GenerationRecord, ...] = ()
    seed: int = 0
    wall_time: float = field(default=0.0, compare=False)

    @property
    def feasible(self) -> bool:
        return self.constraints.feasible

    def to_dict(self) -> Dict[str, Any]:
        """JSON form; wall_time is left out so repeated runs serialize identically."""
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "cluster": self.cluster_name,
            "seed": self.seed,
            "path": self.path.value,
            "chosen": list(self.chosen.p),
            "feasible": self.feasible,
            "sizes_mb": list(self.sizes_mb),
            "latencies": list(self.latencies),
            "accuracy": self.accuracy,
            "speedup": self.speedup,
            "violations": self.violations,
            "g1": self.constraints.g1,
            "g2": self.constraints.g2,
            "penalty": self.penalty.to_dict(),
            "fitness": self.fitness.to_dict(),
            "allocation": None if self.allocation is None else self.allocation.to_dict(),
            "front": [
                {
                    "p": list(c.p.p),
                    "f1": c.objectives.f1,
                    "f2": c.objectives.f2,
                    "f3": c.objectives.f3,
                    "g1": c.constraints.g1,
                    "g2": c.constraints.g2,
                    "feasible": c.feasible,
                }
                for c in self.front
            ],
        }


def build_report(
    cluster: ClusterSpec,
    model,
    hyper: Hyperparams,
    chosen: PruningVector,
    path: SolutionPath,
    front: ParetoFront = ParetoFront(()),
    allocation: Optional[AllocationResult] = None,
    generations: Sequence[GenerationRecord] = (),
    wall_time: float = 0.0,
) -> OptimizationReport:
    """Derive every reported quantity from the chosen vector."""
    profile = latency(chosen, cluster)
    sizes = view_sizes(chosen.as_array(), cluster)
    _, constraints = evaluate_objectives(chosen, cluster, model, hyper)
    return OptimizationReport(
        cluster_name=cluster.name,
        chosen=chosen,
        path=path,
        front=front,
        sizes_mb=tuple(sizes.tolist()),
        latencies=profile.times,
        accuracy=model.evaluate(chosen),
        speedup=baseline_time(cluster) / profile.bottleneck,
        violations=int(np.sum(sizes > cluster.caps)),
        constraints=constraints,
        penalty=penalty(chosen, cluster, model, hyper.phi),
        fitness=total_fitness(chosen, cluster, model, hyper),
        allocation=allocation,
        generations=tuple(generations),
        seed=hyper.seed,
        wall_time=wall_time,
    )


def optimize(
    cluster: ClusterSpec,
    model,
    hyper: Optional[Hyperparams] = None,
    grid: Optional[Sequence[float]] = None,
) -> OptimizationReport:
    """
    Choose a pruning vector for the cluster.

    Args:
        cluster: instance; an accuracy floor above base accuracy is accepted
        model: AccuracyModel
        hyper: hyperparameters, defaults when omitted
        grid: optional discrete pruning levels for both search stages

    Returns:
        OptimizationReport. path is nsga2 only for a feasible choice and
        min_pruning_fallback only with chosen == p_min.

    Raises:
        InfeasibleCap: some device cannot hold even a 99%-pruned model.
    """
    hyper = hyper or Hyperparams()
    start = time.perf_counter()
    validate_cluster(cluster, allow_unreachable_floor=True)

    try:
        alloc = allocate(cluster, hyper.lambda_scale, hyper.invert_perf_in_weights)
    except InfeasibleCap as e:
        logger.error(f"Cannot optimize '{cluster.name}': {e}")
        raise
    logger.info(f"Allocation done for '{cluster.name}': extra budget {alloc.p_extra_total:.4f}")

    init = sample_population(cluster, alloc, hyper.pop_size, hyper.omega, hyper.seed)
    logger.info(f"Sampled {len(init)} initial candidates; running NSGA-II for {hyper.n_generations} generations")
    nsga = nsga2_run(cluster, model, hyper, init, grid=grid)
    generations = list(nsga.generations)

    chosen = select_deployment(nsga.front)
    if chosen is not None:
        path = SolutionPath.NSGA2
    else:
        logger.info("NSGA-II found no feasible deployment; falling back to the single-objective GA")
        ga = ga_run(cluster, model, hyper, init, grid=grid)
        generations.extend(ga.generations)
        floor_penalty = penalty(alloc.p_min, cluster, model, hyper.phi)
        if ga.penalty.total <= 0 or ga.penalty.total < floor_penalty.total:
            chosen, path = ga.best, SolutionPath.GA_FALLBACK
        else:
            logger.info("GA did not improve on minimum pruning; using p_min")
            chosen, path = alloc.p_min, SolutionPath.MIN_PRUNING_FALLBACK

    wall = time.perf_counter() - start
    report = build_report(cluster, model, hyper, chosen, path, nsga.front, alloc, generations, wall)
    logger.info(
        f"'{cluster.name}': path={path.value} speedup={report.speedup:.3f} "
        f"accuracy={report.accuracy:.4f} violations={report.violations} ({wall:.2f}s)"
    )
    return report


def uniform_baseline(
    cluster: ClusterSpec, level: float, model, hyper: Optional[Hyperparams] = None
) -> OptimizationReport:
    """
    Report for pruning every view by the same level.

    Raises:
        OutOfRangePruning: level outside [0, 0.99].
    """
    if not 0.0 <= level <= 0.99:
        raise OutOfRangePruning(f"uniform level {level} outside [0, 0.99]")
    hyper = hyper or Hyperparams()
    p = PruningVector.uniform(level, cluster.n_views)
    return build_report(cluster, model, hyper, p, SolutionPath.UNIFORM_BASELINE)


def format_report_table(report: OptimizationReport) -> str:
    """Human-readable summary of a report."""
    lines = [
        f"Cluster:   {report.cluster_name}",
        f"Path:      {report.path.value}",
        f"Feasible:  {'yes' if report.feasible else 'no'}",
        f"Accuracy:  {report.accuracy:.4f}  (g1 = {report.constraints.g1:+.4f})",
        f"Speedup:   {report.speedup:.3f}x",
        f"Violations: {report.violations}",
        "",
        f"{'view':>4}  {'pruning':>8}  {'size_mb':>10}  {'latency':>10}",
    ]
    for v, (p, s, t) in enumerate(zip(report.chosen.p, report.sizes_mb, report.latencies)):
        lines.append(f"{v:>4}  {p:>8.4f}  {s:>10.3f}  {t:>10.4f}")
    return "\n".join(lines)
