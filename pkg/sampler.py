"""
Importance-aware initial populations for the evolutionary searches.

Rows 0-3 are deterministic seeds built from the allocation (allocated,
minimum, performance-biased, aggressive). The remaining rows draw each view
from Beta((1 - I_v) * omega, 1), floored at the view's minimum pruning, so
low-importance views start out more heavily pruned.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from allocation import AllocationResult
from cluster import MAX_PRUNING, ClusterSpec
from errors import PopulationTooSmall

logger = logging.getLogger(__name__)

ALPHA_FLOOR = 1e-3
PERF_BIAS = 0.2
SEED_TAGS = ("allocated", "min", "perf-biased", "aggressive")
N_SEED_ROWS = len(SEED_TAGS)


@dataclass(frozen=True)
class InitialPopulation:
    """(N, V) matrix of pruning fractions plus the origin of each row."""

    X: np.ndarray
    provenance: Tuple[str, ...]

    def __len__(self) -> int:
        return self.X.shape[0]


def beta_params(importance: Sequence[float], omega: float) -> Tuple[Tuple[float, float], ...]:
    """
    Per-view Beta parameters (alpha_v, beta_v) = ((1 - I_v) * omega, 1).

    alpha_v is floored at 1e-3 so a view with importance 1 still has a
    proper distribution.
    """
    if not omega > 0:
        raise ValueError(f"omega must be > 0, got {omega}")
    alphas = np.maximum(ALPHA_FLOOR, (1.0 - np.asarray(importance, dtype=float)) * omega)
    return tuple((float(a), 1.0) for a in alphas)


def _beta_rows(rng: np.random.Generator, params, p_min: np.ndarray, n_rows: int) -> np.ndarray:
    a = np.array([ab[0] for ab in params])
    b = np.array([ab[1] for ab in params])
    draws = rng.beta(a, b, size=(n_rows, a.size))
    return np.clip(np.maximum(p_min, draws), 0.0, MAX_PRUNING)


def seed_rows(
    cluster: ClusterSpec,
    alloc: AllocationResult,
    omega: float = 4.0,
    rng: np.random.Generator = None,
) -> np.ndarray:
    """
    The four deterministic-formula rows of the initial population.

    Args:
        cluster: instance
        alloc: allocation for this instance
        omega: Beta concentration for the aggressive row
        rng: generator used for the aggressive row's draw

    Returns:
        (4, V) array: p_final, p_min, performance-biased p_min, Beta-max row.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    p_min = alloc.p_min.as_array()
    perf = cluster.perf
    biased = np.minimum(MAX_PRUNING, p_min * (1.0 + PERF_BIAS * perf / perf.sum()))
    aggressive = _beta_rows(rng, beta_params(cluster.importance, omega), p_min, 1)[0]
    return np.vstack([alloc.p_final.as_array(), p_min, biased, aggressive])


def sample_population(
    cluster: ClusterSpec,
    alloc: AllocationResult,
    n: int = 64,
    omega: float = 4.0,
    seed: int = 0,
) -> InitialPopulation:
    """
    Build an N-row initial population.

    Args:
        cluster: instance
        alloc: allocation for this instance
        n: population size, at least 4
        omega: Beta concentration
        seed: RNG seed; rows are drawn with numpy's Generator.beta

    Returns:
        InitialPopulation whose entries lie in [p_min_v, 0.99].

    Raises:
        PopulationTooSmall: n < 4.
    """
    if n < N_SEED_ROWS:
        raise PopulationTooSmall(f"population needs >= {N_SEED_ROWS} rows, got {n}")
    rng = np.random.default_rng(seed)
    seeds = seed_rows(cluster, alloc, omega, rng)
    params = beta_params(cluster.importance, omega)
    rest = _beta_rows(rng, params, alloc.p_min.as_array(), n - N_SEED_ROWS)
    X = np.vstack([seeds, rest])
    provenance = SEED_TAGS + ("beta",) * (n - N_SEED_ROWS)
    logger.debug(f"Sampled initial population of {n} rows over {cluster.n_views} views")
    return InitialPopulation(X=X, provenance=provenance)
