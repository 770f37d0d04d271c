"""
Fitness score components and their weighted sum.

R(p) = alpha * R_acc + beta * R_size + gamma * R_time + delta * R_feas

Every scorer accepts scalars or numpy arrays so whole populations can be
scored in one call.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from cluster import MAX_PRUNING, ClusterSpec, Hyperparams, PruningVector
from cost_models import baseline_time, view_sizes, view_times

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

# Half-width of the "at the boundary" bands in the accuracy and size scores.
BAND = 1e-2
ZERO_SIZE_EPS = 1e-6


def _out(value: np.ndarray) -> Union[float, np.ndarray]:
    return float(value) if np.ndim(value) == 0 else value


def score_accuracy(delta_a: ArrayLike, sigma_r: float, sigma_l: float) -> Union[float, np.ndarray]:
    """
    Accuracy score R_acc for delta_a = A(p) - A_min.

    Args:
        delta_a: accuracy margin(s) over the floor
        sigma_r: slope above the floor
        sigma_l: slope below the floor

    Returns:
        Score in (0, 1], equal to 1 at delta_a = 0.
    """
    d = np.asarray(delta_a, dtype=float)
    mag = np.abs(d)
    near = np.exp(-(mag ** 1.5) / (10.0 * sigma_r ** 2))
    above = np.exp(-mag / (2.0 * sigma_r ** 2))
    below = np.exp(-(mag ** 1.5) / (2.0 * sigma_l ** 2))
    return _out(np.where(d < 0, below, np.where(d <= BAND, near, above)))


def score_size(size_mb: ArrayLike, cap_mb: ArrayLike, sigma: float) -> Union[float, np.ndarray]:
    """
    Per-view size score R_size.

    Over the cap the score decays from 100; within BAND of the cap it is
    exactly 100; well under the cap it is 100 + cap/size. The jump at
    size = cap - BAND is part of the definition.

    Args:
        size_mb: pruned model size(s)
        cap_mb: memory cap(s), broadcast against size_mb
        sigma: decay scale in MB

    Returns:
        Score per element.
    """
    size = np.asarray(size_mb, dtype=float)
    cap = np.asarray(cap_mb, dtype=float)
    diff = size - cap
    under = diff < -BAND
    if np.any(under & (size <= 0)):
        logger.warning(f"Zero model size under the cap; using {ZERO_SIZE_EPS} MB")
        size = np.where(size <= 0, ZERO_SIZE_EPS, size)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        over_score = 100.0 * np.exp(-(diff ** 2) / (10.0 * sigma ** 2))
        under_score = 100.0 + cap / size
    return _out(np.where(diff > BAND, over_score, np.where(under, under_score, 100.0)))


def score_time(max_time: ArrayLike, sigma: float) -> Union[float, np.ndarray]:
    """R_time = 100 * exp(-t^2 / (2 sigma^2)) for bottleneck time t."""
    t = np.asarray(max_time, dtype=float)
    return _out(100.0 * np.exp(-(t ** 2) / (2.0 * sigma ** 2)))


def feasibility_bonus(
    acc: ArrayLike, min_accuracy: float, sizes: np.ndarray, caps: np.ndarray
) -> Union[float, np.ndarray]:
    """
    R_feas for one (V,) or many (N, V) size rows.

    (acc - A_min) + mean_v(cap_v - size_v) when every constraint holds, else 0.
    """
    a = np.asarray(acc, dtype=float)
    s = np.asarray(sizes, dtype=float)
    ok = (a >= min_accuracy) & np.all(s <= caps, axis=-1)
    slack = np.mean(caps - s, axis=-1)
    return _out(np.where(ok, (a - min_accuracy) + slack, 0.0))


def effective_caps(cluster: ClusterSpec) -> np.ndarray:
    """Caps used inside fitness terms; an unbounded cap scores like the view's base size."""
    caps = cluster.caps
    return np.where(np.isinf(caps), cluster.base_sizes, caps)


def score_feasibility(acc: float, cluster: ClusterSpec, sizes: Sequence[float]) -> float:
    """R_feas for one deployment."""
    return float(feasibility_bonus(acc, cluster.min_accuracy, np.asarray(sizes, dtype=float),
                                   effective_caps(cluster)))


def resolve_sigma_time(cluster: ClusterSpec, hyper: Hyperparams) -> float:
    if hyper.sigma_time is not None:
        return hyper.sigma_time
    return 0.5 * baseline_time(cluster)


def weighted_total(r_acc, r_size, r_time, r_feas, hyper: Hyperparams):
    return hyper.alpha * r_acc + hyper.beta * r_size + hyper.gamma * r_time + hyper.delta * r_feas


@dataclass(frozen=True)
class FitnessBreakdown:
    r_acc: float
    r_size_per_view: Tuple[float, ...]
    r_size: float
    r_time: float
    r_feas: float
    total: float

    def to_dict(self) -> dict:
        return {
            "r_acc": self.r_acc,
            "r_size_per_view": list(self.r_size_per_view),
            "r_size": self.r_size,
            "r_time": self.r_time,
            "r_feas": self.r_feas,
            "total": self.total,
        }


@dataclass(frozen=True)
class FitnessBatch:
    """Component scores for a population, one entry per row."""

    accuracy: np.ndarray
    r_acc: np.ndarray
    r_size_per_view: np.ndarray
    r_size: np.ndarray
    r_time: np.ndarray
    r_feas: np.ndarray
    total: np.ndarray


def breakdown_batch(
    X: np.ndarray,
    cluster: ClusterSpec,
    accuracy: np.ndarray,
    hyper: Hyperparams,
) -> FitnessBatch:
    """
    Score an (N, V) population whose accuracies are already known.

    Args:
        X: pruning fractions, one row per candidate
        cluster: instance
        accuracy: (N,) accuracy of each row
        hyper: weights and slopes

    Returns:
        FitnessBatch of per-row scores.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    acc = np.asarray(accuracy, dtype=float)
    caps = effective_caps(cluster)
    sizes = view_sizes(X, cluster)
    r_acc = np.asarray(score_accuracy(acc - cluster.min_accuracy, hyper.sigma_r, hyper.sigma_l))
    r_size_v = np.asarray(score_size(sizes, caps, hyper.sigma_size))
    r_size = r_size_v.mean(axis=1)
    bottleneck = view_times(X, cluster).max(axis=1)
    r_time = np.asarray(score_time(bottleneck, resolve_sigma_time(cluster, hyper)))
    r_feas = np.asarray(feasibility_bonus(acc, cluster.min_accuracy, sizes, caps))
    total = weighted_total(r_acc, r_size, r_time, r_feas, hyper)
    return FitnessBatch(acc, r_acc, r_size_v, r_size, r_time, r_feas, total)


def total_fitness(p: PruningVector, cluster: ClusterSpec, model, hyper: Hyperparams) -> FitnessBreakdown:
    """
    Full fitness breakdown of one pruning vector.

    Args:
        p: pruning vector
        cluster: instance
        model: AccuracyModel supplying A(p)
        hyper: weights and slopes

    Returns:
        FitnessBreakdown whose total is the weighted sum of its components.
    """
    X = p.as_array()[None, :]
    batch = breakdown_batch(X, cluster, model.evaluate_batch(X), hyper)
    return FitnessBreakdown(
        r_acc=float(batch.r_acc[0]),
        r_size_per_view=tuple(batch.r_size_per_view[0].tolist()),
        r_size=float(batch.r_size[0]),
        r_time=float(batch.r_time[0]),
        r_feas=float(batch.r_feas[0]),
        total=float(batch.total[0]),
    )


def max_fitness(cluster: ClusterSpec, hyper: Hyperparams) -> float:
    """
    R_max, the normalizer of the third objective.

    Each component at its attainable maximum: R_acc = 1, R_size from the
    smallest allowed model (p = 0.99), R_time = 100 and R_feas with the full
    accuracy surplus plus the mean slack at p = 0.99. hyper.r_max overrides.
    """
    if hyper.r_max is not None:
        return hyper.r_max
    caps = effective_caps(cluster)
    smallest = cluster.base_sizes * (1.0 - MAX_PRUNING)
    size_best = np.where(smallest - caps < -BAND, 100.0 + caps / smallest, 100.0).mean()
    feas_best = max(0.0, cluster.base_accuracy - cluster.min_accuracy) + max(0.0, float(np.mean(caps - smallest)))
    r_max = float(weighted_total(1.0, size_best, 100.0, feas_best, hyper))
    if r_max <= 0:
        logger.warning("All fitness weights are zero; normalizing by 1")
        return 1.0
    return r_max

