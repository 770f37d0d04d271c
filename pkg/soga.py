"""
Single-objective GA fallback.

Minimizes the aggregate violation penalty

    f(x) = phi * max(0, A_min - A(x)) + sum_v max(0, S_v(x_v) - cap_v)

over the box [p_min, 0.99]^V. The accuracy term is dimensionless times phi
while the size term is in MB.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from allocation import min_pruning
from cluster import ClusterSpec, Hyperparams, PruningVector
from cost_models import view_sizes
from nsga2 import GenerationRecord
from operators import (
    STREAM_GA,
    SearchBox,
    binary_tournament,
    blend_crossover,
    gaussian_mutation,
    grid_mutation,
    stage_rng,
)
from sampler import InitialPopulation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PenaltyValue:
    accuracy_term: float
    size_term: float

    @property
    def total(self) -> float:
        return self.accuracy_term + self.size_term

    def to_dict(self) -> dict:
        return {"accuracy_term": self.accuracy_term, "size_term": self.size_term, "total": self.total}


def penalty_terms(X: np.ndarray, cluster: ClusterSpec, model, phi: float) -> Tuple[np.ndarray, np.ndarray]:
    """(accuracy_term, size_term) arrays for an (N, V) population."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    acc = np.asarray(model.evaluate_batch(X), dtype=float)
    acc_term = phi * np.maximum(0.0, cluster.min_accuracy - acc)
    size_term = np.maximum(0.0, view_sizes(X, cluster) - cluster.caps).sum(axis=1)
    return acc_term, size_term


def penalty_batch(X: np.ndarray, cluster: ClusterSpec, model, phi: float) -> np.ndarray:
    acc_term, size_term = penalty_terms(X, cluster, model, phi)
    return acc_term + size_term


def penalty(x: PruningVector, cluster: ClusterSpec, model, phi: float = 1e4) -> PenaltyValue:
    """Penalty of one vector; zero exactly when both constraints hold."""
    acc_term, size_term = penalty_terms(x.as_array()[None, :], cluster, model, phi)
    return PenaltyValue(accuracy_term=float(acc_term[0]), size_term=float(size_term[0]))


@dataclass(frozen=True)
class GaResult:
    best: PruningVector
    penalty: PenaltyValue
    generations: Tuple[GenerationRecord, ...]


def ga_run(
    cluster: ClusterSpec,
    model,
    hyper: Hyperparams,
    init: InitialPopulation,
    grid: Optional[Sequence[float]] = None,
) -> GaResult:
    """
    Tournament selection, blend crossover and Gaussian mutation with elitism.

    Stops early once a zero-penalty individual is found.

    Args:
        cluster: validated instance
        model: AccuracyModel
        hyper: phi, operator settings, n_generations and seed
        init: starting population (non-empty)
        grid: optional discrete pruning levels to search over

    Returns:
        GaResult with the best individual ever seen.
    """
    if len(init) == 0:
        raise ValueError("GA needs a non-empty initial population")
    box = SearchBox.build(min_pruning(cluster).as_array(), grid)
    rng = stage_rng(hyper.seed, STREAM_GA)
    rate = hyper.mutation_rate_for(cluster.n_views)
    n = len(init)
    pairs_n = n + n % 2

    X = box.repair(init.X)
    pen = penalty_batch(X, cluster, model, hyper.phi)
    best_i = int(np.argmin(pen))
    best_x, best_pen = X[best_i].copy(), float(pen[best_i])
    log = [_record(0, best_pen, pen)]

    for gen in range(1, hyper.n_generations + 1):
        if best_pen <= 0:
            break
        parents = binary_tournament(pen, pairs_n, rng)
        children = blend_crossover(X[parents], hyper.blend_alpha, hyper.crossover_rate, rng)[:n]
        if box.grid is None:
            children = gaussian_mutation(children, hyper.mutation_sigma, rate, rng)
        else:
            children = grid_mutation(box.repair(children), box, rate, rng)
        X = box.repair(children)
        X[0] = best_x
        pen = penalty_batch(X, cluster, model, hyper.phi)
        i = int(np.argmin(pen))
        if pen[i] < best_pen:
            best_x, best_pen = X[i].copy(), float(pen[i])
        log.append(_record(gen, best_pen, pen))
        logger.debug(f"ga gen {gen}: best penalty {best_pen:.6g}")

    best = PruningVector.from_array(best_x)
    value = penalty(best, cluster, model, hyper.phi)
    logger.info(f"GA finished after {len(log) - 1} generations: penalty {value.total:.6g}")
    return GaResult(best=best, penalty=value, generations=tuple(log))


def _record(generation: int, best_pen: float, pen: np.ndarray) -> GenerationRecord:
    return GenerationRecord(
        stage="ga",
        generation=generation,
        best_f1=float("nan"),
        best_penalty=best_pen,
        feasible_count=int((pen <= 0).sum()),
        mean_violation=float(pen.mean()),
    )
