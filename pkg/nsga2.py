"""
Constrained three-objective search with NSGA-II.

Objectives (all minimized):
    f1: bottleneck inference time relative to the unpruned deployment
    f2: accuracy deviation penalty, kappa_g * dA above the floor and
        kappa_l * |dA| at or below it
    f3: -R(p) / R_max, the negated normalized fitness

Constraints: g1 = A_min - A(p) <= 0 and g2 = max_v S_v / cap_v - 1 <= 0.
Feasible candidates dominate infeasible ones; two infeasible candidates
compare by total violation.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from allocation import min_pruning
from cluster import ClusterSpec, Hyperparams, PruningVector
from cost_models import baseline_time, view_sizes, view_times
from errors import PopulationTooSmall
from fitness import breakdown_batch, max_fitness
from operators import (
    STREAM_NSGA2,
    SearchBox,
    binary_tournament,
    grid_mutation,
    polynomial_mutation,
    sbx,
    stage_rng,
)
from sampler import InitialPopulation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObjectiveTriple:
    f1: float
    f2: float
    f3: float

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.f1, self.f2, self.f3)


@dataclass(frozen=True)
class ConstraintPair:
    g1: float
    g2: float

    @property
    def feasible(self) -> bool:
        return self.g1 <= 0 and self.g2 <= 0

    @property
    def violation(self) -> float:
        return max(0.0, self.g1) + max(0.0, self.g2)


@dataclass(frozen=True)
class Candidate:
    p: PruningVector
    objectives: ObjectiveTriple
    constraints: ConstraintPair

    @property
    def feasible(self) -> bool:
        return self.constraints.feasible


@dataclass(frozen=True)
class ParetoFront:
    """Mutually non-dominated candidates sorted by f1."""

    members: Tuple[Candidate, ...]

    @property
    def feasible(self) -> bool:
        return any(c.feasible for c in self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


@dataclass(frozen=True)
class GenerationRecord:
    stage: str
    generation: int
    best_f1: float
    best_penalty: float
    feasible_count: int
    mean_violation: float


@dataclass
class ObjectiveContext:
    """Everything needed to score populations of one instance."""

    cluster: ClusterSpec
    model: object
    hyper: Hyperparams
    t_base: float = field(init=False)
    r_max: float = field(init=False)

    def __post_init__(self):
        self.t_base = baseline_time(self.cluster)
        self.r_max = max_fitness(self.cluster, self.hyper)

    def evaluate(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Score a population.

        Returns:
            (F, G): (N, 3) objectives and (N, 2) constraint values.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cluster, hyper = self.cluster, self.hyper
        acc = np.asarray(self.model.evaluate_batch(X), dtype=float)
        delta = acc - cluster.min_accuracy

        f1 = view_times(X, cluster).max(axis=1) / self.t_base
        f2 = np.where(delta > 0, hyper.kappa_g * delta, hyper.kappa_l * np.abs(delta))
        total = breakdown_batch(X, cluster, acc, hyper).total
        f3 = np.clip(-total / self.r_max, -1.0, 0.0)

        g1 = cluster.min_accuracy - acc
        g2 = (view_sizes(X, cluster) / cluster.caps).max(axis=1) - 1.0
        return np.column_stack([f1, f2, f3]), np.column_stack([g1, g2])


def total_violation(G: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, G[:, 0]) + np.maximum(0.0, G[:, 1])


def to_candidates(X: np.ndarray, F: np.ndarray, G: np.ndarray) -> List[Candidate]:
    return [
        Candidate(
            p=PruningVector.from_array(x),
            objectives=ObjectiveTriple(*map(float, f)),
            constraints=ConstraintPair(*map(float, g)),
        )
        for x, f, g in zip(X, F, G)
    ]


def evaluate_objectives(
    p: PruningVector, cluster: ClusterSpec, model, hyper: Hyperparams
) -> Tuple[ObjectiveTriple, ConstraintPair]:
    """Objectives and constraints of a single pruning vector."""
    F, G = ObjectiveContext(cluster, model, hyper).evaluate(p.as_array()[None, :])
    return ObjectiveTriple(*map(float, F[0])), ConstraintPair(*map(float, G[0]))


def dominates(a: Candidate, b: Candidate) -> bool:
    """Constraint-domination between two candidates."""
    if a.feasible != b.feasible:
        return a.feasible
    if not a.feasible:
        return a.constraints.violation < b.constraints.violation
    fa, fb = a.objectives.as_tuple(), b.objectives.as_tuple()
    return all(x <= y for x, y in zip(fa, fb)) and any(x < y for x, y in zip(fa, fb))


def constrained_dominance_matrix(F: np.ndarray, violation: np.ndarray) -> np.ndarray:
    """D[i, j] is True when candidate i constraint-dominates candidate j."""
    feas = violation <= 0
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    pareto = le & lt
    both_feasible = feas[:, None] & feas[None, :]
    both_infeasible = ~feas[:, None] & ~feas[None, :]
    return (
        (feas[:, None] & ~feas[None, :])
        | (both_infeasible & (violation[:, None] < violation[None, :]))
        | (both_feasible & pareto)
    )


def non_dominated_sort(F: np.ndarray, violation: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Peel constraint-dominance fronts.

    Returns:
        (ranks, fronts): rank per row and row indices of each front.
    """
    D = constrained_dominance_matrix(F, violation)
    counts = D.sum(axis=0)
    ranks = np.full(F.shape[0], -1, dtype=int)
    fronts: List[np.ndarray] = []
    current = np.flatnonzero(counts == 0)
    while current.size:
        ranks[current] = len(fronts)
        fronts.append(current)
        counts = counts - D[current].sum(axis=0)
        current = np.flatnonzero((counts == 0) & (ranks < 0))
    return ranks, fronts


def crowding_distance(F: np.ndarray) -> np.ndarray:
    """Crowding distance within one front; boundary members get inf."""
    n, M = F.shape
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for m in range(M):
        order = np.argsort(F[:, m], kind="stable")
        values = F[order, m]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = values[-1] - values[0]
        if span > 0:
            dist[order[1:-1]] += (values[2:] - values[:-2]) / span
    return dist


def select_survivors(F: np.ndarray, violation: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Elitist environmental selection.

    Whole fronts are taken in rank order; the overflowing front is truncated
    by descending crowding distance, ties going to the smaller f1.

    Returns:
        (indices, ranks, crowding) of the n survivors.
    """
    ranks, fronts = non_dominated_sort(F, violation)
    chosen, crowd = [], []
    for front in fronts:
        d = crowding_distance(F[front])
        room = n - sum(len(c) for c in chosen)
        if len(front) > room:
            keep = np.lexsort((F[front, 0], -d))[:room]
            front, d = front[keep], d[keep]
        chosen.append(front)
        crowd.append(d)
        if sum(len(c) for c in chosen) >= n:
            break
    idx = np.concatenate(chosen)
    return idx, ranks[idx], np.concatenate(crowd)


class ParetoArchive:
    """Bounded store of every non-dominated candidate seen so far."""

    def __init__(self, capacity: int, n_views: int):
        self.capacity = capacity
        self.X = np.empty((0, n_views))
        self.F = np.empty((0, 3))
        self.G = np.empty((0, 2))

    def update(self, X: np.ndarray, F: np.ndarray, G: np.ndarray) -> None:
        allX = np.vstack([self.X, X])
        allF = np.vstack([self.F, F])
        allG = np.vstack([self.G, G])
        _, first = np.unique(allX, axis=0, return_index=True)
        first = np.sort(first)
        allX, allF, allG = allX[first], allF[first], allG[first]
        ranks, _ = non_dominated_sort(allF, total_violation(allG))
        keep = np.flatnonzero(ranks == 0)
        if keep.size > self.capacity:
            d = crowding_distance(allF[keep])
            keep = keep[np.sort(np.lexsort((allF[keep, 0], -d))[: self.capacity])]
        self.X, self.F, self.G = allX[keep], allF[keep], allG[keep]

    def front(self) -> ParetoFront:
        members = to_candidates(self.X, self.F, self.G)
        members.sort(key=lambda c: (c.objectives.f1, c.objectives.f3, c.p.p))
        return ParetoFront(tuple(members))


def _record(stage: str, generation: int, F: np.ndarray, G: np.ndarray) -> GenerationRecord:
    viol = total_violation(G)
    feasible = viol <= 0
    best_f1 = float(F[feasible, 0].min()) if feasible.any() else float("nan")
    return GenerationRecord(
        stage=stage,
        generation=generation,
        best_f1=best_f1,
        best_penalty=float(viol.min()),
        feasible_count=int(feasible.sum()),
        mean_violation=float(viol.mean()),
    )


@dataclass(frozen=True)
class Nsga2Result:
    front: ParetoFront
    generations: Tuple[GenerationRecord, ...]


def nsga2_run(
    cluster: ClusterSpec,
    model,
    hyper: Hyperparams,
    init: InitialPopulation,
    grid: Optional[Sequence[float]] = None,
) -> Nsga2Result:
    """
    Evolve the initial population for hyper.n_generations generations.

    Args:
        cluster: validated instance
        model: AccuracyModel
        hyper: search controls and fitness weights
        init: initial population; its size is the population size
        grid: optional discrete pruning levels to search over

    Returns:
        Nsga2Result with the archive's rank-0 front (possibly all infeasible)
        and one GenerationRecord per generation, generation 0 included.

    Raises:
        PopulationTooSmall: fewer than 4 rows or an odd count.
    """
    n = len(init)
    if n < 4 or n % 2:
        raise PopulationTooSmall(f"NSGA-II needs an even population >= 4, got {n}")
    ctx = ObjectiveContext(cluster, model, hyper)
    box = SearchBox.build(min_pruning(cluster).as_array(), grid)
    rng = stage_rng(hyper.seed, STREAM_NSGA2)
    rate = hyper.mutation_rate_for(cluster.n_views)
    archive = ParetoArchive(hyper.archive_size or 2 * hyper.pop_size, cluster.n_views)

    X = box.repair(init.X)
    F, G = ctx.evaluate(X)
    archive.update(X, F, G)
    keep, ranks, crowd = select_survivors(F, total_violation(G), n)
    X, F, G = X[keep], F[keep], G[keep]
    log = [_record("nsga2", 0, F, G)]

    for gen in range(1, hyper.n_generations + 1):
        parents = binary_tournament(np.column_stack([ranks, -crowd]), n, rng)
        children = sbx(X[parents], box.lower, box.upper, hyper.eta_c, hyper.crossover_rate, rng)
        if box.grid is None:
            children = polynomial_mutation(children, box.lower, box.upper, hyper.eta_m, rate, rng)
        else:
            children = grid_mutation(box.repair(children), box, rate, rng)
        children = box.repair(children)
        Fc, Gc = ctx.evaluate(children)
        archive.update(children, Fc, Gc)

        X, F, G = np.vstack([X, children]), np.vstack([F, Fc]), np.vstack([G, Gc])
        keep, ranks, crowd = select_survivors(F, total_violation(G), n)
        X, F, G = X[keep], F[keep], G[keep]
        record = _record("nsga2", gen, F, G)
        log.append(record)
        logger.debug(
            f"nsga2 gen {gen}: best_f1={record.best_f1:.4f} feasible={record.feasible_count}"
        )

    front = archive.front()
    logger.info(f"NSGA-II finished: front of {len(front)}, feasible={front.feasible}")
    return Nsga2Result(front=front, generations=tuple(log))


def select_candidate(front: ParetoFront) -> Optional[Candidate]:
    """Feasible member with least f1; ties prefer higher fitness, then smaller p."""
    feasible = [c for c in front if c.feasible]
    if not feasible:
        return None
    return min(feasible, key=lambda c: (c.objectives.f1, c.objectives.f3, c.p.p))


def select_deployment(front: ParetoFront) -> Optional[PruningVector]:
    chosen = select_candidate(front)
    return None if chosen is None else chosen.p
