"""
Analytic size, latency and pruning-schedule models.

These stand in for measured hardware behaviour: model size shrinks linearly
with the pruned fraction and inference time is linear in the kept fraction
divided by the device performance factor. All reported latencies are in
base_time_units and only their ratios are meaningful.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from cluster import MAX_PRUNING, ClusterSpec, PruningVector
from errors import NonPositiveTime, OutOfRangePruning

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

_SLACK = 1e-12


def _check_range(p: np.ndarray) -> None:
    if np.any(np.isnan(p)) or np.any(p < -_SLACK) or np.any(p > MAX_PRUNING + _SLACK):
        raise OutOfRangePruning(f"pruning fraction outside [0, {MAX_PRUNING}]: {p}")


def model_size(p: ArrayLike, base: ArrayLike) -> Union[float, np.ndarray]:
    """
    Size in MB of a model of `base` MB after pruning fraction `p`.

    Args:
        p: pruning fraction(s) in [0, 0.99]
        base: unpruned size(s) in MB, broadcast against p

    Returns:
        base * (1 - p), scalar when both inputs are scalars.

    Raises:
        OutOfRangePruning: any p outside [0, 0.99].
    """
    arr = np.asarray(p, dtype=float)
    _check_range(arr)
    size = np.asarray(base, dtype=float) * (1.0 - arr)
    return float(size) if size.ndim == 0 else size


@dataclass(frozen=True)
class SizeModel:
    """Linear size model; base_size_mb is one size or one per view."""

    base_size_mb: Union[float, np.ndarray]

    def size(self, p: ArrayLike) -> Union[float, np.ndarray]:
        return model_size(p, self.base_size_mb)

    def sizes(self, X: np.ndarray) -> np.ndarray:
        """Sizes for a vector (V,) or population (N, V) without the range check."""
        return np.asarray(self.base_size_mb, dtype=float) * (1.0 - np.asarray(X, dtype=float))


def view_sizes(X: np.ndarray, cluster: ClusterSpec) -> np.ndarray:
    """Per-view sizes for one vector (V,) or a population (N, V); no range check."""
    return SizeModel(cluster.base_sizes).sizes(X)


@dataclass(frozen=True)
class LatencyModel:
    """T_v(p) = base_time_units * (1 - p) / perf_factor_v."""

    base_time_units: float = 1.0

    def times(self, X: np.ndarray, perf: np.ndarray) -> np.ndarray:
        return self.base_time_units * (1.0 - np.asarray(X, dtype=float)) / perf

    def baseline(self, perf: np.ndarray) -> float:
        """Bottleneck time of the unpruned deployment."""
        return float(self.base_time_units / np.min(perf))


@dataclass(frozen=True)
class LatencyProfile:
    times: Tuple[float, ...]
    bottleneck: float


def latency(p: PruningVector, cluster: ClusterSpec) -> LatencyProfile:
    """
    Per-view inference times and the bottleneck (slowest view).

    Args:
        p: pruning vector
        cluster: instance supplying performance factors

    Returns:
        LatencyProfile with one time per view and their maximum.
    """
    model = LatencyModel(cluster.base_time_units)
    times = model.times(p.as_array(), cluster.perf)
    return LatencyProfile(times=tuple(times.tolist()), bottleneck=float(times.max()))


def view_times(X: np.ndarray, cluster: ClusterSpec) -> np.ndarray:
    """Latency per view for one vector or a population."""
    return LatencyModel(cluster.base_time_units).times(X, cluster.perf)


def baseline_time(cluster: ClusterSpec) -> float:
    """T_baseline: bottleneck latency with no pruning."""
    return LatencyModel(cluster.base_time_units).baseline(cluster.perf)


def dperf_from_times(times: Sequence[float]) -> Tuple[float, ...]:
    """
    Normalized device performance from measured inference times.

    dPerf_v = (1/t_v) / sum_u (1/t_u)

    Raises:
        NonPositiveTime: any time <= 0.
    """
    t = np.asarray(times, dtype=float)
    if t.size == 0 or np.any(~(t > 0)):
        raise NonPositiveTime(f"inference times must be > 0, got {list(t)}")
    inv = 1.0 / t
    return tuple((inv / inv.sum()).tolist())


@dataclass(frozen=True)
class PruneSchedule:
    """Exponentially decaying split of a total pruning fraction over T+1 steps."""

    total_fraction: float
    decay_rate: float = 0.0
    steps: int = 0

    def fractions(self) -> List[float]:
        return schedule(self.total_fraction, self.decay_rate, self.steps)

    def cumulative(self) -> List[float]:
        return cumulative_schedule(self.total_fraction, self.decay_rate, self.steps)


def schedule(P: float, k: float, T: int) -> List[float]:
    """
    Per-step pruning fractions p_i = e^{-k i} / sum_j e^{-k j} * P.

    Args:
        P: total fraction in [0, 0.99]
        k: decay rate >= 0 (0 gives a uniform split)
        T: number of steps after the first (T + 1 terms)

    Returns:
        List of T + 1 fractions summing to P.

    Raises:
        OutOfRangePruning: P outside [0, 0.99].
        ValueError: k < 0 or T < 0.
    """
    _check_range(np.asarray(P, dtype=float))
    if k < 0:
        raise ValueError(f"decay rate must be >= 0, got {k}")
    if T < 0:
        raise ValueError(f"steps must be >= 0, got {T}")
    weights = np.exp(-float(k) * np.arange(T + 1, dtype=float))
    return (weights / weights.sum() * float(P)).tolist()


def cumulative_schedule(P: float, k: float, T: int) -> List[float]:
    """Fraction pruned after each step; the last entry equals P."""
    steps = schedule(P, k, T)
    running = np.cumsum(steps)
    running[-1] = float(P)
    return running.tolist()
